#pragma once

#include "ftrack/flux.hpp"

#include <limits>
#include <vector>

namespace ftrack {

enum class FrontKind { shock, rarefaction, contact, nonphysical };

const char* to_string(FrontKind kind);

/// One straight discontinuity line. `x` is the position at `born_at`.
///
/// Physical sizes use the unit convention: rarefaction and contact sizes are
/// arclength along the integral curve of r_k (|r_k| = 1), shock sizes are
/// l_k(uL) . (uR - uL). Nonphysical sizes are |uR - uL|.
struct Front {
    int id = -1;
    int family = 0; ///< 1..N physical, N+1 nonphysical
    FrontKind kind = FrontKind::shock;
    double x = 0.0;
    double speed = 0.0;
    State uL;
    State uR;
    double size = 0.0;
    double born_at = 0.0;

    double position(double t) const { return x + speed * (t - born_at); }
    bool nonphysical() const { return kind == FrontKind::nonphysical; }
};

/// Output of a Riemann solver. Fronts are ordered by speed and share states.
struct WaveFan {
    std::vector<Front> fronts;
    std::vector<State> intermediate; ///< omega_0 = uL, ..., omega_N = uR
    std::vector<double> sizes;       ///< per family, unit convention

    bool empty() const { return fronts.empty(); }
};

/// Parameter scale for elementary curves.
enum class CurveScale {
    unit,   ///< |r| = 1 integral curves, l . (T - u) = s on the shock branch
    lambda, ///< lambda_k(T_s) = lambda_k(u) + s on the rarefaction branch
};

struct CurvePoint {
    double s = 0.0;
    State state;
    double sigma = 0.0; ///< rarefaction: lambda_k(T_s); shock: RH speed; contact: lambda_k
};

/// T^k_s[u]. Throws CurveError past the curve radius or on Newton failure and
/// DomainError when the result leaves Omega.
CurvePoint elementary_curve(const FluxModel& model, int k, const State& u, double s,
                            CurveScale scale = CurveScale::lambda);

/// Scalar Riemann fan from the convex (uL < uR) or concave (uL > uR) envelope.
WaveFan scalar_envelope_fan(const FluxModel& model, const State& uL, const State& uR,
                            double eps);

/// Newton on the composed curve map, rarefactions split into fans of opening <= eps.
WaveFan solve_accurate(const FluxModel& model, const State& uL, const State& uR, double eps);

/// Incoming sizes carried over unchanged, remainder sent to a nonphysical front.
WaveFan solve_simplified(const FluxModel& model, const Front& left, const Front& right);

/// Nonphysical front `nonphys` hitting physical front `phys` from the left.
WaveFan solve_crude(const FluxModel& model, const Front& nonphys, const Front& phys);

/// Strength of a nonphysical jump.
double nonphysical_strength(const State& uL, const State& uR);

/// Fan residual |f(uR) - f(uL) - speed (uR - uL)| for one front.
double rh_defect(const FluxModel& model, const Front& front);

} // namespace ftrack
