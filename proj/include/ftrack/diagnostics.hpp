#pragma once

#include "ftrack/measures.hpp"

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ftrack {

// ---------------------------------------------------------------- characteristics

/// Polyline x(t) through nodes (ts[j], xs[j]); slopes[j] holds on [ts[j], ts[j+1]].
struct CharCurve {
    int family = 0;
    double t0 = 0.0;
    double x0 = 0.0;
    std::vector<double> ts;
    std::vector<double> xs;
    std::vector<double> slopes;

    double t1() const { return ts.back(); }
    double position(double t) const;
};

/// Minimal generalized i-characteristic from (t0, x0) up to t1 on the
/// piecewise-constant field. At a front the smallest feasible slope wins;
/// riding the front wins a tie.
CharCurve min_characteristic(const Timeline& timeline, int i, double t0, double x0, double t1);

// ---------------------------------------------------------------- interval unions

struct Interval {
    double a = 0.0;
    double b = 0.0;
};

/// Disjoint closed intervals, ascending.
using IntervalUnion = std::vector<Interval>;

double lebesgue(const IntervalUnion& set);

// ---------------------------------------------------------------- regional balance

/// Space-time region swept by the minimal characteristics issuing from the
/// endpoints of each base interval, over [t0, t0 + tau].
struct Region {
    int family = 1;
    double t0 = 0.0;
    double tau = 0.0;
    IntervalUnion base;
};

/// Event-level constants: |p_k| <= C_I I_k and |p_k^+-| <= C_IC (I_k + C_k).
struct BalanceConstants {
    double C_I = 0.0;
    double C_IC = 0.0;
};

BalanceConstants fit_balance_constants(const Timeline& timeline, int i);

/// Net i-wave transfer across the region boundary at one boundary event.
struct FluxAtom {
    int event = 0;
    double t = 0.0;
    double x = 0.0;
    double phi = 0.0;
    double mu_ic = 0.0;
};

struct BalanceReport {
    double w_in = 0.0;
    double w_out = 0.0;
    double w_in_pos = 0.0;
    double w_out_pos = 0.0;
    double w_in_neg = 0.0;
    double w_out_neg = 0.0;
    double sources = 0.0; ///< sum of p_k over events in the region
    double mu_I = 0.0;
    double mu_IC = 0.0;
    double lateral_between_events = 0.0; ///< |weight| crossing the boundary away from events
    double identity_defect = 0.0;
    std::vector<int> events;
    std::vector<FluxAtom> flux;
    std::vector<CharCurve> left;
    std::vector<CharCurve> right;
    std::vector<std::string> failures;

    bool passed() const { return failures.empty(); }
};

BalanceReport region_balance_check(const Timeline& timeline, const Region& region,
                                   const BalanceConstants& constants);

// ---------------------------------------------------------------- decay checks

struct DecayCase {
    IntervalUnion set;
    double value = 0.0; ///< measured left-hand side
    double base = 0.0;  ///< bound divided by the constant
    double ratio = 0.0;
};

struct DecayReport {
    int family = 0;
    double C = 0.0; ///< tightest constant over all cases
    std::vector<DecayCase> cases;

    /// Whether every case holds with the given constant.
    bool holds(double constant) const;
};

/// [v_i(t)]^+(B) against L(B)/(t - s) + Q(s) - Q(t).
DecayReport positive_decay_check(const Timeline& timeline, int i, double s, double t,
                                 const std::vector<IntervalUnion>& sets);

/// |v_i^cont(t)|(B) against L(B)/tau + mu_ICJ([t - tau, t + tau] x R).
DecayReport decay_estimate_check(const Timeline& timeline, int i, double t, double tau,
                                 const std::vector<IntervalUnion>& sets,
                                 const std::vector<ShockCurve>& curves);

// ---------------------------------------------------------------- tame oscillation

/// {(t, x): t >= tau, a + eta (t - tau) < x < b - eta (t - tau)}.
struct Triangle {
    double tau = 0.0;
    double a = 0.0;
    double b = 0.0;
    double eta = 0.0;
};

/// Smallest eta whose triangle sides outrun every front, nonphysical included.
double eta_bar(const FluxModel& model);

struct OscillationCase {
    Triangle triangle;
    double oscillation = 0.0;
    double base_variation = 0.0;
    double ratio = 0.0;
};

struct OscillationReport {
    double eta_bar = 0.0;
    double C = 0.0;
    std::vector<OscillationCase> cases;
};

/// Throws std::invalid_argument for a triangle with eta < eta_bar.
OscillationReport tame_oscillation_check(const Timeline& timeline,
                                         const std::vector<Triangle>& triangles);

// ---------------------------------------------------------------- SBV report

struct SpectrumSlice {
    double t = 0.0;
    AtomicMeasure1D atoms; ///< jumps of f'(u) (scalar runs only)
};

struct SbvReport {
    double threshold = 0.0;
    std::vector<double> exceptional_times;
    std::vector<double> masses;
    std::vector<SpectrumSlice> spectrum;
};

/// Times t > 0 where mu_ICJ({t} x R) exceeds `threshold`, plus the atoms of
/// D f'(u(t)) at the requested times for scalar runs.
SbvReport sbv_atom_report(const Timeline& timeline, int i, const std::vector<ShockCurve>& curves,
                          double threshold, const std::vector<double>& times = {});

// ---------------------------------------------------------------- convergence

struct UnsupportedScenario : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ExactSolution {
public:
    virtual ~ExactSolution() = default;
    virtual State value(double t, double x) const = 0;
    /// Positions of the discontinuities at time t.
    virtual std::vector<double> discontinuities(double t) const = 0;
};

/// Exact solution for a scalar Riemann problem (burgers, cubic) or linear
/// data with any number of breakpoints. Throws UnsupportedScenario otherwise.
std::unique_ptr<ExactSolution> exact_solution(const RunConfig& config);

/// L1 distance (Euclidean norm pointwise) between the field at t and the exact solution.
double l1_error(const FrontField& field, const ExactSolution& exact);

/// Sum of nonphysical strengths.
double nonphysical_total(const FrontField& field);

struct LadderMember {
    double epsilon = 0.0;
    std::vector<double> errors; ///< one per requested time
    double upsilon0 = 0.0;
    double v_max = 0.0;
    double nonphysical_end = 0.0;
    std::size_t events = 0;
};

struct ConvergenceReport {
    std::vector<double> times;
    std::vector<LadderMember> members;
    /// orders[j][m]: observed order at times[j] between members m and m + 1.
    std::vector<std::vector<double>> orders;
};

ConvergenceReport convergence_study(const RunConfig& base, const std::vector<double>& ladder,
                                    const std::vector<double>& times);

} // namespace ftrack
