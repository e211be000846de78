#include "ftrack/measures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace ftrack {

double AtomicMeasure1D::total() const
{
    double s = 0.0;
    for (const Atom1D& a : atoms)
        s += a.w;
    return s;
}

double AtomicMeasure1D::total_variation() const
{
    double s = 0.0;
    for (const Atom1D& a : atoms)
        s += std::abs(a.w);
    return s;
}

double AtomicMeasure1D::positive_on(double a, double b) const
{
    double s = 0.0;
    for (const Atom1D& at : atoms) {
        if (at.x >= a && at.x <= b && at.w > 0.0)
            s += at.w;
    }
    return s;
}

double AtomicMeasure1D::variation_on(double a, double b) const
{
    double s = 0.0;
    for (const Atom1D& at : atoms) {
        if (at.x >= a && at.x <= b)
            s += std::abs(at.w);
    }
    return s;
}

double SpaceTimeAtoms::mass(double t0, double t1) const
{
    double s = 0.0;
    for (const SpaceTimeAtom& a : atoms) {
        if (a.t >= t0 && a.t <= t1)
            s += std::abs(a.w);
    }
    return s;
}

// ---------------------------------------------------------------- Glimm

double total_variation_V(const std::vector<Front>& fronts)
{
    double v = 0.0;
    for (const Front& f : fronts)
        v += std::abs(f.size);
    return v;
}

double total_variation_V(const FrontField& field) { return total_variation_V(field.fronts); }

double glimm_Q(const std::vector<Front>& fronts)
{
    double transversal = 0.0;
    double same = 0.0;
    const std::size_t n = fronts.size();
    for (std::size_t a = 0; a < n; ++a) {
        const Front& fa = fronts[a];
        for (std::size_t b = a + 1; b < n; ++b) {
            const Front& fb = fronts[b];
            const double prod = std::abs(fa.size * fb.size);
            if (fa.family > fb.family)
                transversal += prod;
            else if (fa.family == fb.family && !fa.nonphysical())
                same += prod * std::abs(fa.speed - fb.speed);
        }
    }
    // Ordered pairs including the diagonal, weighted 1/4: unordered pairs count twice.
    return transversal + 0.5 * same;
}

double glimm_Q(const FrontField& field) { return glimm_Q(field.fronts); }

InteractionAmount interaction_amount(const Front& left, const Front& right)
{
    if (!(left.speed > right.speed))
        throw std::invalid_argument("interaction_amount: fronts do not approach");
    InteractionAmount out;
    if (left.nonphysical() || right.nonphysical()) {
        const Front& np = left.nonphysical() ? left : right;
        const Front& other = left.nonphysical() ? right : left;
        out.amount = std::abs(other.size) * np.size;
        return out;
    }
    if (left.family != right.family) {
        out.amount = std::abs(left.size * right.size);
        return out;
    }
    out.amount = std::abs(left.size * right.size) * std::abs(left.speed - right.speed);
    out.cancellation = std::abs(left.size) + std::abs(right.size) - std::abs(left.size + right.size);
    return out;
}

bool upsilon_decreases(const InteractionEvent& e, double c0, double upsilon0)
{
    const double d = e.dV() + c0 * e.dQ();
    if (d > 1e-12 * upsilon0)
        return false;
    return e.amount <= 1e-13 * upsilon0 || d < 0.0;
}

namespace {

double upsilon_initial(const Timeline& tl, double c0)
{
    return total_variation_V(tl.initial) + c0 * glimm_Q(tl.initial);
}

bool monotone_with(const Timeline& tl, double c0)
{
    const double u0 = upsilon_initial(tl, c0);
    return std::all_of(tl.events.begin(), tl.events.end(),
                       [&](const InteractionEvent& e) { return upsilon_decreases(e, c0, u0); });
}

} // namespace

std::optional<double> calibrate_c0(const Timeline& timeline)
{
    for (int p = 0; p <= 20; ++p) {
        const double c0 = std::ldexp(1.0, p);
        if (monotone_with(timeline, c0))
            return c0;
    }
    return std::nullopt;
}

GlimmLedger glimm_ledger(const Timeline& timeline, std::optional<double> c0)
{
    GlimmLedger ledger;
    if (c0) {
        ledger.c0 = *c0;
    } else if (auto cal = calibrate_c0(timeline)) {
        ledger.c0 = *cal;
        ledger.calibrated = true;
    } else {
        ledger.c0 = std::ldexp(1.0, 20);
    }
    const double v0 = total_variation_V(timeline.initial);
    const double q0 = glimm_Q(timeline.initial);
    ledger.samples.push_back({0.0, v0, q0, v0 + ledger.c0 * q0});
    const double u0 = ledger.upsilon0();
    for (const InteractionEvent& e : timeline.events) {
        ledger.samples.push_back({e.t, e.v_after, e.q_after, e.v_after + ledger.c0 * e.q_after});
        GlimmDelta d;
        d.event = e.index;
        d.t = e.t;
        d.dV = e.dV();
        d.dQ = e.dQ();
        d.dUpsilon = d.dV + ledger.c0 * d.dQ;
        d.amount = e.amount;
        ledger.deltas.push_back(d);
        if (!upsilon_decreases(e, ledger.c0, u0))
            ledger.violations.push_back(e.index);
    }
    return ledger;
}

InteractionFit fit_interaction_constants(const Timeline& timeline)
{
    InteractionFit fit;
    double c = std::numeric_limits<double>::infinity();
    for (const InteractionEvent& e : timeline.events) {
        if (!(e.amount > 0.0))
            continue;
        ++fit.events;
        c = std::min(c, -e.dQ() / e.amount);
        fit.K = std::max(fit.K, std::abs(e.dV() + e.cancellation) / e.amount);
    }
    fit.c = fit.events > 0 ? c : 0.0;
    return fit;
}

SpaceTimeAtoms mu_I(const Timeline& timeline)
{
    SpaceTimeAtoms out;
    for (const InteractionEvent& e : timeline.events)
        out.atoms.push_back({e.t, e.x, e.amount, e.index});
    return out;
}

SpaceTimeAtoms mu_IC(const Timeline& timeline)
{
    SpaceTimeAtoms out;
    for (const InteractionEvent& e : timeline.events)
        out.atoms.push_back({e.t, e.x, e.amount + e.cancellation, e.index});
    return out;
}

// ---------------------------------------------------------------- wave measures

double wave_weight(const FluxModel& model, const Front& front, int i)
{
    if ((front.uL.array() == front.uR.array()).all())
        return 0.0;
    const State jump = front.uR - front.uL;
    if (model.scalar())
        return jump[0];
    return average_eigs(model, front.uL, front.uR).l(i).dot(jump);
}

std::vector<double> front_weights(const Timeline& timeline, int i)
{
    std::vector<double> w;
    w.reserve(timeline.fronts.size());
    for (const FrontRecord& r : timeline.fronts)
        w.push_back(wave_weight(*timeline.model, r.front, i));
    return w;
}

AtomicMeasure1D wave_measure_slice(const FluxModel& model, const FrontField& field, int i)
{
    AtomicMeasure1D m;
    for (const Front& f : field.fronts)
        m.atoms.push_back({f.position(field.time), wave_weight(model, f, i)});
    return m;
}

AtomicMeasure1D lambda_component_slice(const FluxModel& model, const FrontField& field, int i,
                                       const std::set<int>& jump_fronts)
{
    AtomicMeasure1D m;
    for (const Front& f : field.fronts) {
        double w = 0.0;
        if (jump_fronts.count(f.id)) {
            w = model.eigen_at(f.uR).lambda(i) - model.eigen_at(f.uL).lambda(i);
        } else if (!(f.uL.array() == f.uR.array()).all()) {
            const State mid = 0.5 * (f.uL + f.uR);
            const AveragedEigenSystem avg = average_eigs(model, f.uL, f.uR);
            const double rate = model.grad_lambda(i, mid).dot(avg.r(i));
            w = rate * avg.l(i).dot(f.uR - f.uL);
        }
        m.atoms.push_back({f.position(field.time), w});
    }
    return m;
}

// ---------------------------------------------------------------- shock curves

const char* to_string(NodeCase c)
{
    switch (c) {
    case NodeCase::initiation:
        return "initiation";
    case NodeCase::termination:
        return "termination";
    case NodeCase::merge:
        return "merge";
    case NodeCase::interaction:
        return "interaction";
    }
    return "?";
}

std::vector<ShockCurve> extract_shock_curves(const Timeline& timeline, int i, double eps0,
                                             double eps1)
{
    if (!(eps0 > 0.0) || !(eps0 <= eps1))
        throw std::invalid_argument("extract_shock_curves: need 0 < eps0 <= eps1");
    const auto qualifies = [&](int id) {
        const Front& f = timeline.front(id);
        return f.family == i && f.kind == FrontKind::shock && std::abs(f.size) >= eps0;
    };
    const std::size_t n = timeline.fronts.size();
    std::vector<int> succ(n, -1);
    std::vector<int> pred(n, -1);
    for (const InteractionEvent& e : timeline.events) {
        int in = -1;
        for (int id : e.incoming) {
            if (qualifies(id)) {
                in = id;
                break;
            }
        }
        if (in < 0)
            continue;
        for (int id : e.outgoing) {
            if (qualifies(id)) {
                succ[static_cast<std::size_t>(in)] = id;
                pred[static_cast<std::size_t>(id)] = in;
                break;
            }
        }
    }

    std::vector<ShockCurve> curves;
    for (std::size_t id = 0; id < n; ++id) {
        if (!qualifies(static_cast<int>(id)) || pred[id] >= 0)
            continue;
        ShockCurve c;
        c.family = i;
        const Front& first = timeline.front(static_cast<int>(id));
        c.node_t.push_back(first.born_at);
        c.node_x.push_back(first.x);
        for (int cur = static_cast<int>(id); cur >= 0; cur = succ[static_cast<std::size_t>(cur)]) {
            const FrontRecord& r = timeline.fronts[static_cast<std::size_t>(cur)];
            c.segments.push_back(cur);
            c.max_size = std::max(c.max_size, std::abs(r.front.size));
            const double tend = std::min(r.died_at, timeline.t_end());
            c.node_t.push_back(tend);
            c.node_x.push_back(r.front.position(tend));
        }
        if (c.max_size >= eps1) {
            c.id = static_cast<int>(curves.size());
            curves.push_back(std::move(c));
        }
    }
    return curves;
}

std::set<int> curve_fronts(const std::vector<ShockCurve>& curves)
{
    std::set<int> out;
    for (const ShockCurve& c : curves)
        out.insert(c.segments.begin(), c.segments.end());
    return out;
}

JumpSplit split_jump_cont(const FluxModel& model, const FrontField& field, int i,
                          const std::set<int>& jump_fronts)
{
    JumpSplit out;
    for (const Front& f : field.fronts) {
        const Atom1D a{f.position(field.time), wave_weight(model, f, i)};
        if (jump_fronts.count(f.id))
            out.jump.atoms.push_back(a);
        else
            out.cont.atoms.push_back(a);
    }
    return out;
}

SpaceTimeAtoms source_measure_mu_i(const Timeline& timeline, int i)
{
    const std::vector<double> w = front_weights(timeline, i);
    SpaceTimeAtoms out;
    for (const InteractionEvent& e : timeline.events) {
        double p = 0.0;
        for (int id : e.outgoing)
            p += w[static_cast<std::size_t>(id)];
        for (int id : e.incoming)
            p -= w[static_cast<std::size_t>(id)];
        out.atoms.push_back({e.t, e.x, p, e.index});
    }
    return out;
}

std::vector<JumpSourceAtom> source_measure_mu_jump(const Timeline& timeline, int i,
                                                   const std::vector<ShockCurve>& curves)
{
    const std::set<int> on = curve_fronts(curves);
    const FluxModel& model = *timeline.model;
    auto weight = [&](int id) { return wave_weight(model, timeline.front(id), i); };

    std::vector<JumpSourceAtom> out;
    for (int id : timeline.orders.front()) {
        if (on.count(id)) {
            const Front& f = timeline.front(id);
            out.push_back({{0.0, f.x, weight(id), -1}, NodeCase::initiation});
        }
    }
    for (const InteractionEvent& e : timeline.events) {
        std::vector<int> in;
        std::vector<int> outs;
        for (int id : e.incoming) {
            if (on.count(id))
                in.push_back(id);
        }
        for (int id : e.outgoing) {
            if (on.count(id))
                outs.push_back(id);
        }
        if (in.empty() && outs.empty())
            continue;
        JumpSourceAtom a;
        a.atom.t = e.t;
        a.atom.x = e.x;
        a.atom.event = e.index;
        if (in.size() == 1 && outs.empty()) {
            a.node = NodeCase::termination;
            a.atom.w = -weight(in[0]);
        } else if (in.empty() && outs.size() == 1) {
            a.node = NodeCase::initiation;
            a.atom.w = weight(outs[0]);
        } else if (in.size() == 2 && outs.size() == 1) {
            a.node = NodeCase::merge;
            a.atom.w = weight(outs[0]) - weight(in[0]) - weight(in[1]);
        } else if (in.size() == 1 && outs.size() == 1) {
            a.node = NodeCase::interaction;
            a.atom.w = weight(outs[0]) - weight(in[0]);
        } else {
            throw std::logic_error("source_measure_mu_jump: unclassifiable node at event " +
                                   std::to_string(e.index));
        }
        out.push_back(a);
    }
    return out;
}

SpaceTimeAtoms mu_ICJ(const Timeline& timeline, int i, const std::vector<ShockCurve>& curves)
{
    SpaceTimeAtoms out;
    std::map<int, std::size_t> by_event;
    for (const InteractionEvent& e : timeline.events) {
        by_event[e.index] = out.atoms.size();
        out.atoms.push_back({e.t, e.x, e.amount + e.cancellation, e.index});
    }
    for (const JumpSourceAtom& q : source_measure_mu_jump(timeline, i, curves)) {
        if (q.atom.event < 0) {
            SpaceTimeAtom a = q.atom;
            a.w = std::abs(a.w);
            out.atoms.push_back(a);
        } else {
            out.atoms[by_event.at(q.atom.event)].w += std::abs(q.atom.w);
        }
    }
    std::stable_sort(out.atoms.begin(), out.atoms.end(),
                     [](const SpaceTimeAtom& a, const SpaceTimeAtom& b) { return a.t < b.t; });
    return out;
}

} // namespace ftrack
