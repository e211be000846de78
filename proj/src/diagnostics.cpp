#include "ftrack/diagnostics.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace ftrack {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double lam(const FluxModel& m, int i, const State& u) { return m.eigen_at(u).lambda(i); }

double pos_tol(double x) { return 1e-11 * (1.0 + std::abs(x)); }

constexpr double slope_tol = 1e-12;

int last_event_at_or_before(const Timeline& tl, double t)
{
    auto it = std::upper_bound(tl.events.begin(), tl.events.end(), t,
                               [](double v, const InteractionEvent& e) { return v < e.t; });
    return static_cast<int>(it - tl.events.begin()) - 1;
}

int index_of(const FrontField& f, int id)
{
    for (std::size_t j = 0; j < f.fronts.size(); ++j) {
        if (f.fronts[j].id == id)
            return static_cast<int>(j);
    }
    return -1;
}

// Where a characteristic goes after reaching a block of fronts at one point.
struct Choice {
    double slope = 0.0;
    int ride = -1; ///< front id, or -1 for a constant region
    State state;
    int left = -1;
    int right = -1;
};

Choice choose(const FluxModel& m, int i, const FrontField& f, std::size_t j0, std::size_t j1)
{
    std::vector<Choice> feasible;
    const std::size_t n = j1 - j0 + 1;
    for (std::size_t r = 0; r <= n; ++r) {
        Choice c;
        c.state = r == 0 ? f.fronts[j0].uL : f.fronts[j0 + r - 1].uR;
        c.slope = lam(m, i, c.state);
        const double lo = r == 0 ? -inf : f.fronts[j0 + r - 1].speed;
        const double hi = r == n ? inf : f.fronts[j0 + r].speed;
        if (c.slope > lo + slope_tol && c.slope < hi - slope_tol) {
            c.left = r == 0 ? (j0 > 0 ? f.fronts[j0 - 1].id : -1) : f.fronts[j0 + r - 1].id;
            c.right = r == n ? (j1 + 1 < f.fronts.size() ? f.fronts[j1 + 1].id : -1)
                             : f.fronts[j0 + r].id;
            feasible.push_back(c);
        }
    }
    for (std::size_t j = j0; j <= j1; ++j) {
        const Front& fr = f.fronts[j];
        const double a = lam(m, i, fr.uL);
        const double b = lam(m, i, fr.uR);
        if (fr.speed >= std::min(a, b) - slope_tol && fr.speed <= std::max(a, b) + slope_tol) {
            Choice c;
            c.slope = fr.speed;
            c.ride = fr.id;
            feasible.push_back(c);
        }
    }
    if (feasible.empty())
        throw std::logic_error("min_characteristic: no admissible direction");
    auto better = [](const Choice& x, const Choice& y) {
        if (std::abs(x.slope - y.slope) > slope_tol)
            return x.slope < y.slope;
        return x.ride >= 0 && y.ride < 0;
    };
    Choice best = feasible.front();
    for (const Choice& c : feasible) {
        if (better(c, best))
            best = c;
    }
    return best;
}

// Contiguous block of fronts sitting at x at time t, if any.
bool block_at(const FrontField& f, double t, double x, std::size_t& j0, std::size_t& j1)
{
    bool found = false;
    for (std::size_t j = 0; j < f.fronts.size(); ++j) {
        if (std::abs(f.fronts[j].position(t) - x) <= pos_tol(x)) {
            if (!found)
                j0 = j;
            j1 = j;
            found = true;
        }
    }
    return found;
}

} // namespace

double CharCurve::position(double t) const
{
    if (t <= ts.front())
        return xs.front();
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    if (it == ts.end())
        return xs.back();
    const std::size_t j = static_cast<std::size_t>(it - ts.begin()) - 1;
    return xs[j] + slopes[j] * (t - ts[j]);
}

CharCurve min_characteristic(const Timeline& tl, int i, double t0, double x0, double t1)
{
    if (!(t0 >= 0.0) || !(t0 < t1) || t1 > tl.t_end() * (1.0 + 1e-12) || !std::isfinite(x0))
        throw std::invalid_argument("min_characteristic: need 0 <= t0 < t1 <= t_end and finite x0");
    const FluxModel& m = *tl.model;

    int k = last_event_at_or_before(tl, t0);
    FrontField f = tl.field_after(k);

    CharCurve c;
    c.family = i;
    c.t0 = t0;
    c.x0 = x0;
    c.ts.push_back(t0);
    c.xs.push_back(x0);

    double t = t0;
    double x = x0;
    int ride = -1;
    int left = -1;
    int right = -1;
    State u;

    auto apply = [&](const Choice& ch) {
        ride = ch.ride;
        if (ride < 0) {
            u = ch.state;
            left = ch.left;
            right = ch.right;
        }
    };
    // Free placement by position, keeping known neighbours on their side.
    auto relocate = [&]() {
        int l = -1;
        int r = -1;
        for (const Front& fr : f.fronts) {
            bool on_left;
            if (fr.id == left)
                on_left = true;
            else if (fr.id == right)
                on_left = false;
            else
                on_left = fr.position(t) < x;
            if (on_left)
                l = fr.id;
            else if (r < 0)
                r = fr.id;
        }
        left = l;
        right = r;
        const int li = index_of(f, l);
        u = li < 0 ? f.left_state : f.fronts[static_cast<std::size_t>(li)].uR;
    };
    auto settle = [&]() {
        std::size_t j0 = 0;
        std::size_t j1 = 0;
        if (block_at(f, t, x, j0, j1))
            apply(choose(m, i, f, j0, j1));
        else
            relocate();
    };

    settle();
    const std::size_t guard = 16 * (tl.events.size() + tl.fronts.size()) + 1024;
    for (std::size_t iter = 0; t < t1; ++iter) {
        if (iter > guard)
            throw std::logic_error("min_characteristic: no progress");
        const double t_ev = static_cast<std::size_t>(k + 1) < tl.events.size()
                                ? tl.events[static_cast<std::size_t>(k + 1)].t
                                : inf;
        if (ride >= 0) {
            const Front& fr = tl.front(ride);
            const double tn = std::min(t1, t_ev);
            x = fr.position(tn);
            c.slopes.push_back(fr.speed);
            c.ts.push_back(tn);
            c.xs.push_back(x);
            t = tn;
            if (t >= t1)
                break;
            ++k;
            f = tl.field_after(k);
            const InteractionEvent& e = tl.events[static_cast<std::size_t>(k)];
            if (tl.fronts[static_cast<std::size_t>(ride)].died_event == e.index) {
                x = e.x;
                c.xs.back() = x;
                ride = -1;
                left = right = -1;
                settle();
            }
            continue;
        }

        const double slope = lam(m, i, u);
        double t_hit = inf;
        const int li = index_of(f, left);
        const int ri = index_of(f, right);
        if (ri >= 0) {
            const Front& fr = f.fronts[static_cast<std::size_t>(ri)];
            if (slope > fr.speed)
                t_hit = std::min(t_hit, t + std::max(0.0, fr.position(t) - x) / (slope - fr.speed));
        }
        if (li >= 0) {
            const Front& fr = f.fronts[static_cast<std::size_t>(li)];
            if (fr.speed > slope)
                t_hit = std::min(t_hit, t + std::max(0.0, x - fr.position(t)) / (fr.speed - slope));
        }
        const double tn = std::min({t1, t_ev, t_hit});
        x += slope * (tn - t);
        c.slopes.push_back(slope);
        c.ts.push_back(tn);
        c.xs.push_back(x);
        t = tn;
        if (t >= t1)
            break;
        if (t_ev <= t_hit * (1.0 + 1e-13) + 1e-300) {
            ++k;
            f = tl.field_after(k);
            const InteractionEvent& e = tl.events[static_cast<std::size_t>(k)];
            if (std::abs(e.x - x) <= pos_tol(x)) {
                x = e.x;
                c.xs.back() = x;
                left = right = -1;
                settle();
            } else {
                relocate();
            }
        } else {
            left = right = -1;
            settle();
        }
    }
    return c;
}

double lebesgue(const IntervalUnion& set)
{
    double l = 0.0;
    for (const Interval& iv : set)
        l += iv.b - iv.a;
    return l;
}

// ---------------------------------------------------------------- balance

namespace {

struct EventParts {
    double p = 0.0;
    double p_pos = 0.0;
    double p_neg = 0.0;
};

EventParts event_parts(const InteractionEvent& e, const std::vector<double>& w)
{
    EventParts out;
    auto add = [&](int id, double sign) {
        const double v = w[static_cast<std::size_t>(id)];
        out.p += sign * v;
        out.p_pos += sign * std::max(v, 0.0);
        out.p_neg += sign * std::max(-v, 0.0);
    };
    for (int id : e.outgoing)
        add(id, 1.0);
    for (int id : e.incoming)
        add(id, -1.0);
    return out;
}

struct Book {
    double m0 = 0.0;
    double m1 = 0.0;
    double in = 0.0;
    double out = 0.0;
};

} // namespace

BalanceConstants fit_balance_constants(const Timeline& tl, int i)
{
    const std::vector<double> w = front_weights(tl, i);
    BalanceConstants c;
    for (const InteractionEvent& e : tl.events) {
        const EventParts p = event_parts(e, w);
        if (e.amount > 0.0)
            c.C_I = std::max(c.C_I, std::abs(p.p) / e.amount);
        const double ic = e.amount + e.cancellation;
        if (ic > 0.0)
            c.C_IC = std::max(c.C_IC, std::max(std::abs(p.p_pos), std::abs(p.p_neg)) / ic);
    }
    return c;
}

BalanceReport region_balance_check(const Timeline& tl, const Region& region,
                                   const BalanceConstants& constants)
{
    const double t0 = region.t0;
    const double t1 = region.t0 + region.tau;
    if (!(region.tau > 0.0) || t0 < 0.0 || t1 > tl.t_end() * (1.0 + 1e-12) || region.base.empty())
        throw std::invalid_argument("region_balance_check: invalid region");
    for (std::size_t m = 0; m < region.base.size(); ++m) {
        if (!(region.base[m].a < region.base[m].b) ||
            (m > 0 && !(region.base[m - 1].b < region.base[m].a)))
            throw std::invalid_argument("region_balance_check: base must be disjoint ascending intervals");
    }

    BalanceReport rep;
    for (const Interval& iv : region.base) {
        rep.left.push_back(min_characteristic(tl, region.family, t0, iv.a, t1));
        rep.right.push_back(min_characteristic(tl, region.family, t0, iv.b, t1));
    }
    auto inside = [&](double t, double x) {
        for (std::size_t m = 0; m < rep.left.size(); ++m) {
            const double a = rep.left[m].position(t);
            const double b = rep.right[m].position(t);
            if (x >= a - pos_tol(x) && x < b - pos_tol(x))
                return true;
        }
        return false;
    };

    std::vector<double> crit;
    for (const InteractionEvent& e : tl.events) {
        if (e.t > t0 && e.t < t1)
            crit.push_back(e.t);
    }
    for (const auto* side : {&rep.left, &rep.right}) {
        for (const CharCurve& c : *side)
            crit.insert(crit.end(), c.ts.begin(), c.ts.end());
    }
    std::sort(crit.begin(), crit.end());
    crit.erase(std::unique(crit.begin(), crit.end()), crit.end());

    for (std::size_t m = 0; m < rep.left.size(); ++m) {
        for (double t : crit) {
            if (t < t0 || t > t1)
                continue;
            if (rep.left[m].position(t) > rep.right[m].position(t) + pos_tol(rep.left[m].position(t)))
                rep.failures.push_back("bounding characteristics cross");
        }
    }

    std::vector<char> ev_in(tl.events.size(), 0);
    for (const InteractionEvent& e : tl.events) {
        if (e.t > t0 && e.t <= t1 && inside(e.t, e.x)) {
            ev_in[static_cast<std::size_t>(e.index)] = 1;
            rep.events.push_back(e.index);
        }
    }

    const std::vector<double> w = front_weights(tl, region.family);
    Book signed_book;
    Book pos_book;
    Book neg_book;
    std::map<int, double> phi;

    for (const FrontRecord& r : tl.fronts) {
        const double tb = r.front.born_at;
        const double td = r.died_at;
        if (td <= t0 || tb > t1)
            continue;
        const double lo = std::max(tb, t0);
        const double hi = std::min(td, t1);

        std::vector<char> mem;
        if (hi > lo) {
            std::vector<double> cut{lo};
            for (auto it = std::upper_bound(crit.begin(), crit.end(), lo);
                 it != crit.end() && *it < hi; ++it)
                cut.push_back(*it);
            cut.push_back(hi);
            for (std::size_t j = 0; j + 1 < cut.size(); ++j) {
                const double tm = 0.5 * (cut[j] + cut[j + 1]);
                mem.push_back(inside(tm, r.front.position(tm)) ? 1 : 0);
            }
        } else {
            mem.push_back(r.born_event >= 0 && ev_in[static_cast<std::size_t>(r.born_event)] ? 1 : 0);
        }

        const double wj = w[static_cast<std::size_t>(r.front.id)];
        const double parts[3] = {wj, std::max(wj, 0.0), std::max(-wj, 0.0)};
        Book* books[3] = {&signed_book, &pos_book, &neg_book};
        for (int b = 0; b < 3; ++b) {
            Book& bk = *books[b];
            const double v = parts[b];
            if (tb > t0) {
                const bool ein = ev_in[static_cast<std::size_t>(r.born_event)];
                if (ein && !mem.front())
                    bk.out += v;
                if (!ein && mem.front())
                    bk.in += v;
            } else {
                bk.m0 += mem.front() ? v : 0.0;
            }
            for (std::size_t j = 1; j < mem.size(); ++j) {
                if (mem[j] && !mem[j - 1])
                    bk.in += v;
                if (!mem[j] && mem[j - 1])
                    bk.out += v;
            }
            if (td <= t1) {
                const bool ein = ev_in[static_cast<std::size_t>(r.died_event)];
                if (ein && !mem.back())
                    bk.in += v;
                if (!ein && mem.back())
                    bk.out += v;
            } else {
                bk.m1 += mem.back() ? v : 0.0;
            }
        }

        if (tb > t0) {
            const bool ein = ev_in[static_cast<std::size_t>(r.born_event)];
            if (ein != static_cast<bool>(mem.front()))
                phi[r.born_event] += ein ? -wj : wj;
        }
        for (std::size_t j = 1; j < mem.size(); ++j) {
            if (mem[j] != mem[j - 1])
                rep.lateral_between_events += std::abs(wj);
        }
        if (td <= t1) {
            const bool ein = ev_in[static_cast<std::size_t>(r.died_event)];
            if (ein != static_cast<bool>(mem.back()))
                phi[r.died_event] += ein ? wj : -wj;
        }
    }

    rep.w_in = signed_book.m0 + signed_book.in;
    rep.w_out = signed_book.m1 + signed_book.out;
    rep.w_in_pos = pos_book.m0 + pos_book.in;
    rep.w_out_pos = pos_book.m1 + pos_book.out;
    rep.w_in_neg = neg_book.m0 + neg_book.in;
    rep.w_out_neg = neg_book.m1 + neg_book.out;

    const SpaceTimeAtoms p = source_measure_mu_i(tl, region.family);
    for (int k : rep.events) {
        const InteractionEvent& e = tl.events[static_cast<std::size_t>(k)];
        rep.sources += p.atoms[static_cast<std::size_t>(k)].w;
        rep.mu_I += e.amount;
        rep.mu_IC += e.amount + e.cancellation;
    }
    for (const auto& [k, v] : phi) {
        const InteractionEvent& e = tl.events[static_cast<std::size_t>(k)];
        rep.flux.push_back({k, e.t, e.x, v, e.amount + e.cancellation});
    }

    const double scale = 1.0 + std::abs(rep.w_in_pos) + std::abs(rep.w_in_neg) +
                         std::abs(rep.w_out_pos) + std::abs(rep.w_out_neg);
    const double tol = 1e-12 * scale;
    rep.identity_defect = std::abs(rep.w_out - rep.w_in - rep.sources);
    if (rep.identity_defect > tol)
        rep.failures.push_back("balance identity defect " + std::to_string(rep.identity_defect));
    if (std::abs(rep.w_out - rep.w_in) > constants.C_I * rep.mu_I + tol)
        rep.failures.push_back("|W_out - W_in| exceeds C_I mu_I");
    if (std::abs(rep.w_out_pos - rep.w_in_pos) > constants.C_IC * rep.mu_IC + tol)
        rep.failures.push_back("|W+_out - W+_in| exceeds C_IC mu_IC");
    if (std::abs(rep.w_out_neg - rep.w_in_neg) > constants.C_IC * rep.mu_IC + tol)
        rep.failures.push_back("|W-_out - W-_in| exceeds C_IC mu_IC");
    return rep;
}

// ---------------------------------------------------------------- decay

namespace {

double ratio_of(double value, double base)
{
    if (value <= 0.0)
        return 0.0;
    return base > 0.0 ? value / base : inf;
}

} // namespace

bool DecayReport::holds(double constant) const
{
    return std::all_of(cases.begin(), cases.end(), [&](const DecayCase& c) {
        return c.value <= constant * c.base * (1.0 + 1e-12) + 1e-14;
    });
}

DecayReport positive_decay_check(const Timeline& tl, int i, double s, double t,
                                 const std::vector<IntervalUnion>& sets)
{
    if (!(s >= 0.0) || !(s < t) || t > tl.t_end() * (1.0 + 1e-12))
        throw std::invalid_argument("positive_decay_check: need 0 <= s < t <= t_end");
    const FrontField fs = tl.slice_at(s);
    const FrontField ft = tl.slice_at(t);
    const double q_drop = glimm_Q(fs) - glimm_Q(ft);
    const AtomicMeasure1D v = wave_measure_slice(*tl.model, ft, i);
    DecayReport rep;
    rep.family = i;
    for (const IntervalUnion& b : sets) {
        DecayCase c;
        c.set = b;
        for (const Interval& iv : b)
            c.value += v.positive_on(iv.a, iv.b);
        c.base = lebesgue(b) / (t - s) + q_drop;
        c.ratio = ratio_of(c.value, c.base);
        rep.C = std::max(rep.C, c.ratio);
        rep.cases.push_back(c);
    }
    return rep;
}

DecayReport decay_estimate_check(const Timeline& tl, int i, double t, double tau,
                                 const std::vector<IntervalUnion>& sets,
                                 const std::vector<ShockCurve>& curves)
{
    if (!(tau > 0.0) || !(tau < t) || t > tl.t_end() * (1.0 + 1e-12))
        throw std::invalid_argument("decay_estimate_check: need 0 < tau < t <= t_end");
    const JumpSplit split = split_jump_cont(*tl.model, tl.slice_at(t), i, curve_fronts(curves));
    const double atoms = mu_ICJ(tl, i, curves).mass(t - tau, t + tau);
    DecayReport rep;
    rep.family = i;
    for (const IntervalUnion& b : sets) {
        DecayCase c;
        c.set = b;
        for (const Interval& iv : b)
            c.value += split.cont.variation_on(iv.a, iv.b);
        c.base = lebesgue(b) / tau + atoms;
        c.ratio = ratio_of(c.value, c.base);
        rep.C = std::max(rep.C, c.ratio);
        rep.cases.push_back(c);
    }
    return rep;
}

// ---------------------------------------------------------------- tame oscillation

double eta_bar(const FluxModel& model)
{
    return std::max({model.nonphysical_speed(), -model.fences().front(), 0.0});
}

namespace {

// States taken by the field on the open section ]lo, hi[ at its time.
void states_in(const FrontField& f, double lo, double hi, std::vector<State>& out)
{
    if (!(lo < hi))
        return;
    State cur = f.left_state;
    std::size_t j = 0;
    for (; j < f.fronts.size() && f.fronts[j].position(f.time) <= lo; ++j)
        cur = f.fronts[j].uR;
    out.push_back(cur);
    for (; j < f.fronts.size() && f.fronts[j].position(f.time) < hi; ++j)
        out.push_back(f.fronts[j].uR);
}

} // namespace

OscillationReport tame_oscillation_check(const Timeline& tl, const std::vector<Triangle>& triangles)
{
    OscillationReport rep;
    rep.eta_bar = eta_bar(*tl.model);
    for (const Triangle& tr : triangles) {
        if (tr.eta < rep.eta_bar)
            throw std::invalid_argument("tame_oscillation_check: eta below eta_bar");
        if (!(tr.a < tr.b) || !(tr.tau >= 0.0) || tr.tau > tl.t_end())
            throw std::invalid_argument("tame_oscillation_check: invalid triangle");
        OscillationCase oc;
        oc.triangle = tr;
        const FrontField base = tl.slice_at(tr.tau);
        for (const Front& fr : base.fronts) {
            const double x = fr.position(tr.tau);
            if (x > tr.a && x < tr.b)
                oc.base_variation += (fr.uR - fr.uL).norm();
        }
        std::vector<State> states;
        states_in(base, tr.a, tr.b, states);
        const double top = std::min(tr.tau + 0.5 * (tr.b - tr.a) / tr.eta, tl.t_end());
        for (const InteractionEvent& e : tl.events) {
            if (e.t <= tr.tau || e.t >= top)
                continue;
            const double h = tr.eta * (e.t - tr.tau);
            states_in(tl.field_after(e.index), tr.a + h, tr.b - h, states);
        }
        for (std::size_t p = 0; p < states.size(); ++p) {
            for (std::size_t q = p + 1; q < states.size(); ++q)
                oc.oscillation = std::max(oc.oscillation, (states[p] - states[q]).norm());
        }
        oc.ratio = ratio_of(oc.oscillation, oc.base_variation);
        rep.C = std::max(rep.C, oc.ratio);
        rep.cases.push_back(oc);
    }
    return rep;
}

// ---------------------------------------------------------------- SBV report

SbvReport sbv_atom_report(const Timeline& tl, int i, const std::vector<ShockCurve>& curves,
                          double threshold, const std::vector<double>& times)
{
    SbvReport rep;
    rep.threshold = threshold;
    std::map<double, double> by_time;
    for (const SpaceTimeAtom& a : mu_ICJ(tl, i, curves).atoms) {
        if (a.t > 0.0)
            by_time[a.t] += std::abs(a.w);
    }
    for (const auto& [t, mass] : by_time) {
        if (mass > threshold) {
            rep.exceptional_times.push_back(t);
            rep.masses.push_back(mass);
        }
    }
    if (tl.model->scalar()) {
        for (double t : times) {
            SpectrumSlice s;
            s.t = t;
            const FrontField f = tl.slice_at(t);
            for (const Front& fr : f.fronts)
                s.atoms.atoms.push_back(
                    {fr.position(t), lam(*tl.model, 1, fr.uR) - lam(*tl.model, 1, fr.uL)});
            rep.spectrum.push_back(std::move(s));
        }
    }
    return rep;
}

// ---------------------------------------------------------------- exact solutions

namespace {

// Self-similar solution of a scalar Riemann problem: u(xi) extremizes
// f(u) - xi u over the closed interval between the states.
class ScalarRiemannExact final : public ExactSolution {
public:
    ScalarRiemannExact(ModelPtr model, double x0, double ul, double ur)
        : model_(std::move(model)), x0_(x0), ul_(ul), ur_(ur)
    {
        const double lo = std::min(ul, ur);
        const double hi = std::max(ul, ur);
        double smin = inf;
        double smax = -inf;
        for (int j = 0; j <= 256; ++j) {
            const double s = slope(lo + (hi - lo) * j / 256.0);
            smin = std::min(smin, s);
            smax = std::max(smax, s);
        }
        smin -= 1.0;
        smax += 1.0;
        constexpr int n = 2048;
        const double threshold = 1e-6 * (hi - lo);
        for (int j = 0; j < n; ++j) {
            double a = smin + (smax - smin) * j / n;
            double b = smin + (smax - smin) * (j + 1) / n;
            double ua = at(a);
            double ub = at(b);
            if (std::abs(ub - ua) <= threshold)
                continue;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (a + b);
                const double um = at(mid);
                if (std::abs(um - ua) >= std::abs(ub - um)) {
                    b = mid;
                    ub = um;
                } else {
                    a = mid;
                    ua = um;
                }
            }
            if (std::abs(ub - ua) > threshold)
                jumps_.push_back(0.5 * (a + b));
        }
    }

    State value(double t, double x) const override
    {
        State s(1);
        s[0] = t > 0.0 ? at((x - x0_) / t) : (x < x0_ ? ul_ : ur_);
        return s;
    }

    std::vector<double> discontinuities(double t) const override
    {
        std::vector<double> out;
        if (t <= 0.0) {
            out.push_back(x0_);
            return out;
        }
        for (double xi : jumps_)
            out.push_back(x0_ + xi * t);
        return out;
    }

private:
    double slope(double u) const { return lam(*model_, 1, scalar(u)); }

    static State scalar(double u)
    {
        State s(1);
        s[0] = u;
        return s;
    }

    // Points where f'(u) = xi.
    std::vector<double> inverse_slope(double xi) const
    {
        if (model_->id() == "burgers")
            return {xi};
        if (xi < 0.0)
            return {};
        const double r = std::sqrt(xi);
        return {-r, r};
    }

    double at(double xi) const
    {
        const double lo = std::min(ul_, ur_);
        const double hi = std::max(ul_, ur_);
        std::vector<double> cand{ul_, ur_};
        for (double u : inverse_slope(xi)) {
            if (u > lo && u < hi)
                cand.push_back(u);
        }
        const bool minimize = ul_ < ur_;
        double best = cand.front();
        double best_g = model_->flux(scalar(best))[0] - xi * best;
        for (double u : cand) {
            const double g = model_->flux(scalar(u))[0] - xi * u;
            if (minimize ? g < best_g : g > best_g) {
                best = u;
                best_g = g;
            }
        }
        return best;
    }

    ModelPtr model_;
    double x0_;
    double ul_;
    double ur_;
    std::vector<double> jumps_;
};

// u(t, x) = u_0 + sum over breakpoints and families of (l_k . jump) r_k H(x - x_j - lambda_k t).
class LinearExact final : public ExactSolution {
public:
    LinearExact(const FluxModel& model, const InitialData& data)
        : xs_(data.xs), left_(data.states.front()), eig_(model.eigen_at(data.states.front()))
    {
        for (std::size_t j = 0; j < xs_.size(); ++j)
            jumps_.push_back(data.states[j + 1] - data.states[j]);
    }

    State value(double t, double x) const override
    {
        State u = left_;
        for (std::size_t j = 0; j < xs_.size(); ++j) {
            for (int k = 1; k <= eig_.dim(); ++k) {
                if (x > xs_[j] + eig_.lambda(k) * t)
                    u += eig_.l(k).dot(jumps_[j]) * eig_.r(k);
            }
        }
        return u;
    }

    std::vector<double> discontinuities(double t) const override
    {
        std::vector<double> out;
        for (double x : xs_) {
            for (int k = 1; k <= eig_.dim(); ++k)
                out.push_back(x + eig_.lambda(k) * t);
        }
        return out;
    }

private:
    std::vector<double> xs_;
    State left_;
    std::vector<State> jumps_;
    EigenSystem eig_;
};

State field_state_at(const FrontField& f, double x)
{
    State cur = f.left_state;
    for (const Front& fr : f.fronts) {
        if (fr.position(f.time) < x)
            cur = fr.uR;
        else
            break;
    }
    return cur;
}

} // namespace

std::unique_ptr<ExactSolution> exact_solution(const RunConfig& config)
{
    ModelPtr model = make_model(config.model_id, config.model_params);
    const InitialData& d = config.initial;
    if (d.kind != InitialData::Kind::breakpoints)
        throw UnsupportedScenario("no exact solution for profile data");
    if (model->id() == "linear")
        return std::make_unique<LinearExact>(*model, d);
    if ((model->id() == "burgers" || model->id() == "cubic") && d.xs.size() == 1)
        return std::make_unique<ScalarRiemannExact>(model, d.xs[0], d.states[0][0], d.states[1][0]);
    throw UnsupportedScenario("no exact solution for model '" + model->id() + "' with " +
                              std::to_string(d.xs.size()) + " breakpoints");
}

double l1_error(const FrontField& field, const ExactSolution& exact)
{
    const double t = field.time;
    std::vector<double> pts = exact.discontinuities(t);
    for (const Front& fr : field.fronts)
        pts.push_back(fr.position(t));
    std::sort(pts.begin(), pts.end());
    if (pts.empty())
        pts.push_back(0.0);
    pts.insert(pts.begin(), pts.front() - 1.0);
    pts.push_back(pts.back() + 1.0);
    using Rule = boost::math::quadrature::gauss<double, 20>;
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
        const double a = pts[j];
        const double b = pts[j + 1];
        if (!(b > a))
            continue;
        const State uh = field_state_at(field, 0.5 * (a + b));
        total += Rule::integrate([&](double x) { return (uh - exact.value(t, x)).norm(); }, a, b);
    }
    return total;
}

double nonphysical_total(const FrontField& field)
{
    double s = 0.0;
    for (const Front& f : field.fronts) {
        if (f.nonphysical())
            s += f.size;
    }
    return s;
}

ConvergenceReport convergence_study(const RunConfig& base, const std::vector<double>& ladder,
                                    const std::vector<double>& times)
{
    const std::unique_ptr<ExactSolution> exact = exact_solution(base);
    ConvergenceReport rep;
    rep.times = times;
    for (double eps : ladder) {
        RunConfig c = base;
        c.epsilon = eps;
        const Timeline tl = run(c);
        LadderMember m;
        m.epsilon = eps;
        m.events = tl.events.size();
        for (double t : times)
            m.errors.push_back(l1_error(tl.slice_at(t), *exact));
        const GlimmLedger g = glimm_ledger(tl, base.c0);
        m.upsilon0 = g.upsilon0();
        for (const GlimmSample& s : g.samples)
            m.v_max = std::max(m.v_max, s.V);
        m.nonphysical_end = nonphysical_total(tl.slice_at(tl.t_end()));
        rep.members.push_back(std::move(m));
    }
    for (std::size_t j = 0; j < times.size(); ++j) {
        std::vector<double> row;
        for (std::size_t m = 0; m + 1 < rep.members.size(); ++m) {
            const double e0 = rep.members[m].errors[j];
            const double e1 = rep.members[m + 1].errors[j];
            const double r = rep.members[m].epsilon / rep.members[m + 1].epsilon;
            row.push_back(e0 > 0.0 && e1 > 0.0 ? std::log(e0 / e1) / std::log(r)
                                               : std::numeric_limits<double>::quiet_NaN());
        }
        rep.orders.push_back(std::move(row));
    }
    return rep;
}

} // namespace ftrack
