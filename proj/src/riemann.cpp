#include "ftrack/riemann.hpp"

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace ftrack {

const char* to_string(FrontKind kind)
{
    switch (kind) {
    case FrontKind::shock:
        return "shock";
    case FrontKind::rarefaction:
        return "rarefaction";
    case FrontKind::contact:
        return "contact";
    case FrontKind::nonphysical:
        return "nonphysical";
    }
    return "?";
}

double nonphysical_strength(const State& uL, const State& uR) { return (uR - uL).norm(); }

double rh_defect(const FluxModel& model, const Front& front)
{
    return (model.flux(front.uR) - model.flux(front.uL) - front.speed * (front.uR - front.uL))
        .norm();
}

namespace {

constexpr double ode_step = 0.02;
constexpr double hugoniot_step = 0.05;
constexpr double skip_size = 1e-13;

using OdeState = std::vector<double>;

/// Integral curve of r_k (or r_k / rate_k) augmented with arclength.
struct CurveOde {
    const FluxModel& model;
    int k;
    bool lambda_scale;

    void operator()(const OdeState& y, OdeState& dy, double) const
    {
        const int n = model.dim();
        State u = Eigen::Map<const State>(y.data(), n);
        const EigenSystem e = model.eigen_at(u);
        State r = e.r(k);
        if (lambda_scale)
            r /= e.gnl_rate(k);
        for (int i = 0; i < n; ++i)
            dy[static_cast<std::size_t>(i)] = r[i];
        dy[static_cast<std::size_t>(n)] = r.norm();
    }
};

struct IntegralResult {
    State state;
    double arclength = 0.0;
};

IntegralResult integrate_curve(const FluxModel& model, int k, const State& u, double tau,
                               bool lambda_scale)
{
    const int n = model.dim();
    OdeState y(static_cast<std::size_t>(n) + 1, 0.0);
    for (int i = 0; i < n; ++i)
        y[static_cast<std::size_t>(i)] = u[i];
    const auto steps = static_cast<std::size_t>(std::max(4.0, std::ceil(std::abs(tau) / ode_step)));
    boost::numeric::odeint::runge_kutta_fehlberg78<OdeState> stepper;
    boost::numeric::odeint::integrate_n_steps(stepper, CurveOde{model, k, lambda_scale}, y, 0.0,
                                              tau / static_cast<double>(steps), steps);
    IntegralResult out;
    out.state = Eigen::Map<const State>(y.data(), n);
    out.arclength = y[static_cast<std::size_t>(n)];
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(out.state[i]))
            throw CurveError("integral curve produced a non-finite state");
    }
    return out;
}

/// Hugoniot locus point with l_k(u) . (T - u) = s, by Newton continuation in s.
State hugoniot_point(const FluxModel& model, int k, const State& u, double s)
{
    const int n = model.dim();
    const EigenSystem e0 = model.eigen_at(u);
    const State ell = e0.l(k);
    State w = e0.r(k) / ell.dot(e0.r(k));
    double sigma = e0.lambda(k);
    const State fu = model.flux(u);

    auto residual = [&](const State& ww, double sg, double sj) {
        State res(n + 1);
        res.head(n) = (model.flux(u + sj * ww) - fu) / sj - sg * ww;
        res[n] = ell.dot(ww) - 1.0;
        return res;
    };

    const int stages = std::max(1, static_cast<int>(std::ceil(std::abs(s) / hugoniot_step)));
    for (int j = 1; j <= stages; ++j) {
        const double sj = s * j / stages;
        bool converged = false;
        State res = residual(w, sigma, sj);
        for (int it = 0; it < 50 && !converged; ++it) {
            Matrix jac = Matrix::Zero(n + 1, n + 1);
            jac.topLeftCorner(n, n) = model.jacobian_at(u + sj * w) - sigma * Matrix::Identity(n, n);
            jac.topRightCorner(n, 1) = -w;
            jac.bottomLeftCorner(1, n) = ell.transpose();
            const State delta = jac.fullPivLu().solve(-res);
            double damp = 1.0;
            State w_new;
            double sigma_new = 0.0;
            State res_new;
            for (int h = 0; h < 30; ++h) {
                w_new = w + damp * delta.head(n);
                sigma_new = sigma + damp * delta[n];
                res_new = residual(w_new, sigma_new, sj);
                if (res_new.allFinite() && res_new.norm() <= res.norm())
                    break;
                damp *= 0.5;
            }
            if (!res_new.allFinite())
                break;
            w = w_new;
            sigma = sigma_new;
            res = res_new;
            // The difference quotient carries roundoff of order |f(u)| / |s|.
            const double noise = 1e-14 * (1.0 + fu.norm() / std::abs(sj));
            converged = damp * delta.norm() <= 1e-14 * (1.0 + w.norm()) || res.norm() <= noise;
        }
        if (!converged) {
            std::ostringstream os;
            os << "Hugoniot Newton failed for family " << k << " at s = " << sj;
            throw CurveError(os.str());
        }
    }
    return u + s * w;
}

FrontKind kind_for(const FluxModel& model, int k, double s)
{
    if (model.field_kind(k) == FieldKind::linearly_degenerate)
        return FrontKind::contact;
    return s < 0.0 ? FrontKind::shock : FrontKind::rarefaction;
}

double rh_speed(const FluxModel& model, const State& a, const State& b)
{
    const State du = b - a;
    return (model.flux(b) - model.flux(a)).dot(du) / du.dot(du);
}

double speed_for(const FluxModel& model, int k, FrontKind kind, const State& a, const State& b)
{
    switch (kind) {
    case FrontKind::shock:
        return rh_speed(model, a, b);
    case FrontKind::rarefaction:
        return average_eigs(model, a, b).lambda(k);
    case FrontKind::contact:
        return 0.5 * (model.eigen_at(a).lambda(k) + model.eigen_at(b).lambda(k));
    case FrontKind::nonphysical:
        return model.nonphysical_speed();
    }
    return 0.0;
}

Front make_front(const FluxModel& model, int k, FrontKind kind, const State& a, const State& b,
                 double size)
{
    Front f;
    f.family = k;
    f.kind = kind;
    f.uL = a;
    f.uR = b;
    f.size = size;
    f.speed = speed_for(model, k, kind, a, b);
    return f;
}

Front make_nonphysical(const FluxModel& model, const State& a, const State& b)
{
    Front f;
    f.family = model.dim() + 1;
    f.kind = FrontKind::nonphysical;
    f.uL = a;
    f.uR = b;
    f.size = nonphysical_strength(a, b);
    f.speed = model.nonphysical_speed();
    return f;
}

/// Rarefaction of family k from a to b split into pieces of opening <= eps.
void emit_rarefaction_fan(const FluxModel& model, int k, const State& a, const State& b,
                          double size, double eps, std::vector<Front>& out)
{
    const double opening = model.eigen_at(b).lambda(k) - model.eigen_at(a).lambda(k);
    const int pieces = std::max(1, static_cast<int>(std::ceil(opening / eps - 1e-9)));
    std::vector<State> nodes{a};
    std::vector<double> arcs;
    if (pieces == 1) {
        arcs.push_back(1.0);
    } else {
        State cur = a;
        for (int j = 0; j < pieces; ++j) {
            IntegralResult step = integrate_curve(model, k, cur, opening / pieces, true);
            arcs.push_back(step.arclength);
            cur = step.state;
            nodes.push_back(cur);
        }
        nodes.pop_back();
    }
    nodes.push_back(b);
    double total = 0.0;
    for (double a_j : arcs)
        total += a_j;
    for (int j = 0; j < pieces; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        out.push_back(make_front(model, k, FrontKind::rarefaction, nodes[ju], nodes[ju + 1],
                                 size * arcs[ju] / total));
    }
}

/// Chains fronts for the given family sizes starting from uL and closes the
/// fan at uR, snapping a negligible remainder or adding a nonphysical front.
WaveFan chain_with_remainder(const FluxModel& model, const State& uL, const State& uR,
                             const std::vector<std::pair<int, double>>& pieces)
{
    WaveFan fan;
    fan.sizes.assign(static_cast<std::size_t>(model.dim()), 0.0);
    fan.intermediate.push_back(uL);
    State cur = uL;
    for (const auto& [k, s] : pieces) {
        fan.sizes[static_cast<std::size_t>(k - 1)] += s;
        if (s == 0.0)
            continue;
        const CurvePoint pt = elementary_curve(model, k, cur, s, CurveScale::unit);
        fan.fronts.push_back(make_front(model, k, kind_for(model, k, s), cur, pt.state, s));
        cur = pt.state;
        fan.intermediate.push_back(cur);
    }
    const double residual = nonphysical_strength(cur, uR);
    if (!fan.fronts.empty() && residual <= skip_size) {
        fan.fronts.back().uR = uR;
        fan.intermediate.back() = uR;
    } else if (!(cur.array() == uR.array()).all()) {
        fan.fronts.push_back(make_nonphysical(model, cur, uR));
        fan.intermediate.push_back(uR);
    }
    return fan;
}

double scalar_flux(const FluxModel& m, double u)
{
    State s(1);
    s[0] = u;
    return m.flux(s)[0];
}

double scalar_speed(const FluxModel& m, double u)
{
    State s(1);
    s[0] = u;
    return m.jacobian_at(s)(0, 0);
}

/// Root of fn in [lo, hi]; returns `fallback` when the bracket has no sign change.
double bracketed_root(const std::function<double(double)>& fn, double lo, double hi,
                      double fallback)
{
    if (!(lo < hi))
        return fallback;
    const double flo = fn(lo);
    const double fhi = fn(hi);
    if (flo == 0.0)
        return lo;
    if (fhi == 0.0)
        return hi;
    if ((flo < 0.0) == (fhi < 0.0))
        return fallback;
    std::uintmax_t iters = 200;
    try {
        const auto r = boost::math::tools::toms748_solve(
            fn, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52), iters);
        return 0.5 * (r.first + r.second);
    } catch (const std::exception& e) {
        throw SolverError(std::string("envelope root finding failed: ") + e.what());
    }
}

} // namespace

CurvePoint elementary_curve(const FluxModel& model, int k, const State& u, double s,
                            CurveScale scale)
{
    if (k < 1 || k > model.dim())
        throw CurveError("elementary_curve: family out of range");
    if (!model.domain().contains(u))
        throw DomainError("elementary_curve: base state outside the model domain");
    const FieldKind kind = model.field_kind(k);
    if (kind == FieldKind::general)
        throw CurveError("elementary_curve: field " + std::to_string(k) +
                         " is neither genuinely nonlinear nor linearly degenerate");
    if (!std::isfinite(s) || std::abs(s) > model.curve_radius())
        throw CurveError("elementary_curve: |s| exceeds the curve radius");

    CurvePoint pt;
    pt.s = s;
    if (s == 0.0) {
        pt.state = u;
        pt.sigma = model.eigen_at(u).lambda(k);
        return pt;
    }
    if (kind == FieldKind::linearly_degenerate) {
        pt.state = integrate_curve(model, k, u, s, false).state;
    } else if (s > 0.0) {
        pt.state = integrate_curve(model, k, u, s, scale == CurveScale::lambda).state;
    } else {
        double s_unit = s;
        if (scale == CurveScale::lambda)
            s_unit = s / model.eigen_at(u).gnl_rate(k);
        pt.state = hugoniot_point(model, k, u, s_unit);
    }
    if (!model.domain().contains(pt.state, 1e-12))
        throw DomainError("elementary_curve: curve leaves the model domain");
    if (kind == FieldKind::genuinely_nonlinear && s < 0.0)
        pt.sigma = rh_speed(model, u, pt.state);
    else
        pt.sigma = model.eigen_at(pt.state).lambda(k);
    return pt;
}

WaveFan scalar_envelope_fan(const FluxModel& model, const State& uL, const State& uR, double eps)
{
    if (!model.scalar())
        throw std::invalid_argument("scalar_envelope_fan: model is not scalar");
    if (!(eps > 0.0))
        throw std::invalid_argument("scalar_envelope_fan: eps must be positive");
    if (!model.domain().contains(uL) || !model.domain().contains(uR))
        throw DomainError("scalar_envelope_fan: state outside the model domain");

    WaveFan fan;
    fan.intermediate = {uL, uR};
    fan.sizes = {uR[0] - uL[0]};
    const double ul = uL[0];
    const double ur = uR[0];
    if (ul == ur)
        return fan;

    const double sgn = ul < ur ? 1.0 : -1.0;
    const double a = std::min(ul, ur);
    const double b = std::max(ul, ur);
    auto g = [&](double u) { return sgn * scalar_flux(model, u); };
    auto dg = [&](double u) { return sgn * scalar_speed(model, u); };

    auto scalar_state = [](double v) {
        State s(1);
        s[0] = v;
        return s;
    };
    auto emit = [&](FrontKind kind, double from, double to) {
        Front f;
        f.family = 1;
        f.kind = kind;
        f.uL = scalar_state(from);
        f.uR = scalar_state(to);
        f.size = to - from;
        f.speed = (scalar_flux(model, to) - scalar_flux(model, from)) / (to - from);
        fan.fronts.push_back(f);
    };

    if (b - a <= 1e-6) {
        const double mid = 0.5 * (a + b);
        State m(1);
        m[0] = mid;
        const double curvature = sgn * model.grad_lambda(1, m)[0];
        emit(curvature > 0.0 ? FrontKind::rarefaction : FrontKind::shock, ul, ur);
        fan.fronts.back().uL = uL;
        fan.fronts.back().uR = uR;
        return fan;
    }

    // Lower convex hull of g on a uniform grid (monotone chain).
    constexpr int grid = 4096;
    std::vector<double> us(grid + 1);
    std::vector<double> gs(grid + 1);
    for (int i = 0; i <= grid; ++i) {
        us[static_cast<std::size_t>(i)] = i == grid ? b : a + (b - a) * i / grid;
        gs[static_cast<std::size_t>(i)] = g(us[static_cast<std::size_t>(i)]);
    }
    std::vector<int> hull;
    for (int i = 0; i <= grid; ++i) {
        while (hull.size() >= 2) {
            const auto p = static_cast<std::size_t>(hull[hull.size() - 2]);
            const auto q = static_cast<std::size_t>(hull.back());
            const auto r = static_cast<std::size_t>(i);
            const double cross =
                (us[q] - us[p]) * (gs[r] - gs[p]) - (gs[q] - gs[p]) * (us[r] - us[p]);
            if (cross > 0.0)
                break;
            hull.pop_back();
        }
        hull.push_back(i);
    }

    // Pieces in increasing u: affine (shock) or curved (fan).
    struct Piece {
        bool affine;
        double lo;
        double hi;
    };
    std::vector<Piece> pieces;
    for (std::size_t e = 0; e + 1 < hull.size(); ++e) {
        const int i = hull[e];
        const int j = hull[e + 1];
        const bool affine = j - i > 1;
        if (!affine && !pieces.empty() && !pieces.back().affine) {
            pieces.back().hi = us[static_cast<std::size_t>(j)];
            continue;
        }
        pieces.push_back({affine, us[static_cast<std::size_t>(i)], us[static_cast<std::size_t>(j)]});
    }

    // Refine tangency points of affine pieces.
    const double h = (b - a) / grid;
    for (std::size_t p = 0; p < pieces.size(); ++p) {
        if (!pieces[p].affine)
            continue;
        double lo = pieces[p].lo;
        double hi = pieces[p].hi;
        const bool free_lo = lo > a;
        const bool free_hi = hi < b;
        for (int it = 0; it < 40 && (free_lo || free_hi); ++it) {
            const double lo_prev = lo;
            const double hi_prev = hi;
            if (free_hi) {
                auto phi = [&](double x) { return dg(x) * (x - lo) - (g(x) - g(lo)); };
                hi = bracketed_root(phi, std::max(lo + 0.5 * h, hi - h), std::min(b, hi + h), hi);
            }
            if (free_lo) {
                auto psi = [&](double x) { return dg(x) * (hi - x) - (g(hi) - g(x)); };
                lo = bracketed_root(psi, std::max(a, lo - h), std::min(hi - 0.5 * h, lo + h), lo);
            }
            if (std::abs(lo - lo_prev) <= 1e-16 && std::abs(hi - hi_prev) <= 1e-16)
                break;
        }
        pieces[p].lo = lo;
        pieces[p].hi = hi;
        if (p > 0)
            pieces[p - 1].hi = lo;
        if (p + 1 < pieces.size())
            pieces[p + 1].lo = hi;
    }
    pieces.erase(std::remove_if(pieces.begin(), pieces.end(),
                                [](const Piece& pc) { return !(pc.hi > pc.lo); }),
                 pieces.end());
    if (sgn < 0.0)
        std::reverse(pieces.begin(), pieces.end());

    for (const Piece& pc : pieces) {
        const double from = sgn > 0.0 ? pc.lo : pc.hi;
        const double to = sgn > 0.0 ? pc.hi : pc.lo;
        if (pc.affine) {
            emit(FrontKind::shock, from, to);
            continue;
        }
        const double s0 = scalar_speed(model, from);
        const double s1 = scalar_speed(model, to);
        const double opening = s1 - s0;
        const int n = std::max(1, static_cast<int>(std::ceil(opening / eps - 1e-9)));
        double prev = from;
        for (int j = 1; j <= n; ++j) {
            double next = to;
            if (j < n) {
                const double target = s0 + opening * j / n;
                auto fn = [&](double x) { return scalar_speed(model, x) - target; };
                next = bracketed_root(fn, pc.lo, pc.hi, prev);
            }
            if (next != prev)
                emit(FrontKind::rarefaction, prev, next);
            prev = next;
        }
    }

    fan.fronts.front().uL = uL;
    for (std::size_t j = 1; j < fan.fronts.size(); ++j)
        fan.fronts[j].uL = fan.fronts[j - 1].uR;
    fan.fronts.back().uR = uR;
    return fan;
}

WaveFan solve_accurate(const FluxModel& model, const State& uL, const State& uR, double eps)
{
    if (!(eps > 0.0))
        throw std::invalid_argument("solve_accurate: eps must be positive");
    if (!model.domain().contains(uL) || !model.domain().contains(uR))
        throw DomainError("solve_accurate: state outside the model domain");
    const int n = model.dim();
    if ((uL.array() == uR.array()).all()) {
        WaveFan fan;
        fan.intermediate.assign(static_cast<std::size_t>(n) + 1, uL);
        fan.sizes.assign(static_cast<std::size_t>(n), 0.0);
        return fan;
    }
    if ((uR - uL).norm() > model.riemann_radius())
        throw SolverError("solve_accurate: |uR - uL| exceeds the Riemann radius");
    if (model.scalar() && model.field_kind(1) == FieldKind::general)
        return scalar_envelope_fan(model, uL, uR, eps);

    auto compose = [&](const State& s) {
        State cur = uL;
        for (int k = 1; k <= n; ++k)
            cur = elementary_curve(model, k, cur, s[k - 1], CurveScale::unit).state;
        return cur;
    };
    std::string last_error;
    auto try_residual = [&](const State& s, State& out) {
        try {
            out = compose(s) - uR;
            return out.allFinite();
        } catch (const DomainError& e) {
            last_error = e.what();
        } catch (const CurveError& e) {
            last_error = e.what();
        }
        return false;
    };

    State s = model.eigen_at(uL).left * (uR - uL);
    State res;
    if (!try_residual(s, res))
        throw SolverError("solve_accurate: initial guess failed (" + last_error + ")");
    bool converged = res.norm() <= 1e-12;
    constexpr double fd = 1e-7;
    for (int it = 0; it < 50 && !converged; ++it) {
        Matrix jac(n, n);
        for (int k = 0; k < n; ++k) {
            State sp = s;
            State sm = s;
            sp[k] += fd;
            sm[k] -= fd;
            State rp;
            State rm;
            if (!try_residual(sp, rp) || !try_residual(sm, rm))
                throw SolverError("solve_accurate: Jacobian evaluation failed (" + last_error + ")");
            jac.col(k) = (rp - rm) / (2.0 * fd);
        }
        const State delta = jac.fullPivLu().solve(-res);
        double damp = 1.0;
        bool accepted = false;
        for (int h = 0; h < 30; ++h) {
            State trial = s + damp * delta;
            State r_trial;
            if (try_residual(trial, r_trial) && r_trial.norm() < res.norm()) {
                s = trial;
                res = r_trial;
                accepted = true;
                break;
            }
            damp *= 0.5;
        }
        if (!accepted)
            break;
        converged = res.norm() <= 1e-12;
    }
    if (!converged) {
        std::ostringstream os;
        os << "solve_accurate: Newton did not converge (residual " << res.norm() << ")";
        throw SolverError(os.str());
    }

    WaveFan fan;
    fan.sizes.assign(static_cast<std::size_t>(n), 0.0);
    fan.intermediate.push_back(uL);
    int last = 0;
    for (int k = 1; k <= n; ++k) {
        if (std::abs(s[k - 1]) > skip_size)
            last = k;
    }
    if (last == 0) {
        // Every wave is negligible but the states differ: keep the largest one.
        Eigen::Index big = 0;
        s.cwiseAbs().maxCoeff(&big);
        last = static_cast<int>(big) + 1;
    }
    State cur = uL;
    for (int k = 1; k <= n; ++k) {
        const double sk = s[k - 1];
        fan.sizes[static_cast<std::size_t>(k - 1)] = sk;
        if (std::abs(sk) <= skip_size && k != last) {
            fan.intermediate.push_back(cur);
            continue;
        }
        State next = k == last ? State(uR)
                               : elementary_curve(model, k, cur, sk, CurveScale::unit).state;
        const FrontKind kind = kind_for(model, k, sk);
        if (kind == FrontKind::rarefaction)
            emit_rarefaction_fan(model, k, cur, next, sk, eps, fan.fronts);
        else
            fan.fronts.push_back(make_front(model, k, kind, cur, next, sk));
        cur = next;
        fan.intermediate.push_back(cur);
        if (k == last) {
            for (int rest = k + 1; rest <= n; ++rest) {
                fan.sizes[static_cast<std::size_t>(rest - 1)] = s[rest - 1];
                fan.intermediate.push_back(cur);
            }
            break;
        }
    }
    return fan;
}

WaveFan solve_simplified(const FluxModel& model, const Front& left, const Front& right)
{
    if (left.nonphysical() || right.nonphysical())
        throw std::invalid_argument("solve_simplified: incoming fronts must be physical");
    if (model.field_kind(left.family) == FieldKind::general ||
        model.field_kind(right.family) == FieldKind::general)
        throw SolverError("solve_simplified: general fields need the accurate solver");
    std::vector<std::pair<int, double>> pieces;
    if (left.family == right.family) {
        pieces.emplace_back(left.family, left.size + right.size);
    } else {
        pieces.emplace_back(left.family, left.size);
        pieces.emplace_back(right.family, right.size);
        if (pieces[0].first > pieces[1].first)
            std::swap(pieces[0], pieces[1]);
    }
    return chain_with_remainder(model, left.uL, right.uR, pieces);
}

WaveFan solve_crude(const FluxModel& model, const Front& nonphys, const Front& phys)
{
    if (!nonphys.nonphysical() || phys.nonphysical())
        throw std::invalid_argument("solve_crude: expects a nonphysical front then a physical one");
    return chain_with_remainder(model, nonphys.uL, phys.uR, {{phys.family, phys.size}});
}

} // namespace ftrack
