#pragma once

#include "ftrack/tracker.hpp"

#include <optional>
#include <set>
#include <vector>

namespace ftrack {

struct Atom1D {
    double x = 0.0;
    double w = 0.0;
};

/// Finitely many weighted points on the line, ascending in x.
struct AtomicMeasure1D {
    std::vector<Atom1D> atoms;

    double total() const;
    double total_variation() const;
    /// Positive part restricted to [a, b].
    double positive_on(double a, double b) const;
    /// Total variation restricted to [a, b].
    double variation_on(double a, double b) const;
};

struct SpaceTimeAtom {
    double t = 0.0;
    double x = 0.0;
    double w = 0.0;
    int event = -1; ///< -1 for atoms carried by the initial data
};

struct SpaceTimeAtoms {
    std::vector<SpaceTimeAtom> atoms;

    /// Sum of |w| over atoms with t in [t0, t1].
    double mass(double t0 = -1e300, double t1 = 1e300) const;
};

// ---------------------------------------------------------------- Glimm

/// Sum of |s| over physical fronts plus nonphysical strengths.
double total_variation_V(const std::vector<Front>& fronts);
double total_variation_V(const FrontField& field);

/// Wave interaction potential. `fronts` must be ordered left to right.
double glimm_Q(const std::vector<Front>& fronts);
double glimm_Q(const FrontField& field);

struct InteractionAmount {
    double amount = 0.0;
    double cancellation = 0.0;
};

/// Amount of interaction of the colliding pair `left`, `right`.
/// Throws std::invalid_argument if the pair does not approach.
InteractionAmount interaction_amount(const Front& left, const Front& right);

struct GlimmSample {
    double t = 0.0;
    double V = 0.0;
    double Q = 0.0;
    double upsilon = 0.0;
};

struct GlimmDelta {
    int event = 0;
    double t = 0.0;
    double dV = 0.0;
    double dQ = 0.0;
    double dUpsilon = 0.0;
    double amount = 0.0;
};

struct GlimmLedger {
    double c0 = 1.0;
    bool calibrated = false; ///< c0 found by the doubling search
    std::vector<GlimmSample> samples;
    std::vector<GlimmDelta> deltas;
    std::vector<int> violations; ///< events failing the monotonicity audit

    double upsilon0() const { return samples.empty() ? 0.0 : samples.front().upsilon; }
    bool monotone() const { return violations.empty(); }
};

/// Whether Upsilon = V + c0 Q decreases across event `e`: dUpsilon <= 1e-12 Upsilon(0)
/// always, and strictly negative when the interaction amount exceeds 1e-13 Upsilon(0).
bool upsilon_decreases(const InteractionEvent& e, double c0, double upsilon0);

/// Smallest power of two in [1, 2^20] making Upsilon monotone, if any.
std::optional<double> calibrate_c0(const Timeline& timeline);

/// Ledger with the given c0, or the calibrated one when unset (falling back to
/// 2^20 with violations recorded when calibration fails).
GlimmLedger glimm_ledger(const Timeline& timeline, std::optional<double> c0 = std::nullopt);

/// Run-level constants with dQ <= -c I and |dV + C| <= K I on every event with
/// I > 0, where C is the cancellation (so |dV| <= K I wherever nothing cancels).
struct InteractionFit {
    double c = 0.0;
    double K = 0.0;
    std::size_t events = 0;
};

InteractionFit fit_interaction_constants(const Timeline& timeline);

/// Interaction atoms I at every event.
SpaceTimeAtoms mu_I(const Timeline& timeline);
/// Interaction plus cancellation atoms.
SpaceTimeAtoms mu_IC(const Timeline& timeline);

// ---------------------------------------------------------------- wave measures

/// l_i(uL, uR) . (uR - uL) from the averaged eigensystem of the front's jump.
double wave_weight(const FluxModel& model, const Front& front, int i);

/// Wave weights of every front in the timeline, indexed by front id.
std::vector<double> front_weights(const Timeline& timeline, int i);

/// i-th wave measure of a field: one atom per front.
AtomicMeasure1D wave_measure_slice(const FluxModel& model, const FrontField& field, int i);

/// i-th component of D_x lambda_i: jump atoms on fronts in `jump_fronts`
/// (fronts of i-shock curves), rate-weighted continuous atoms elsewhere.
AtomicMeasure1D lambda_component_slice(const FluxModel& model, const FrontField& field, int i,
                                       const std::set<int>& jump_fronts);

// ---------------------------------------------------------------- shock curves

enum class NodeCase { initiation, termination, merge, interaction };

const char* to_string(NodeCase c);

struct ShockCurve {
    int id = 0;
    int family = 0;
    std::vector<int> segments; ///< front ids in time order
    std::vector<double> node_t; ///< segments.size() + 1 nodes
    std::vector<double> node_x;
    double max_size = 0.0;

    double t_minus() const { return node_t.front(); }
    double t_plus() const { return node_t.back(); }
};

/// Maximal polylines of i-shocks with |s| >= eps0, reaching |s| >= eps1
/// somewhere; at merges the leftmost incoming curve continues.
std::vector<ShockCurve> extract_shock_curves(const Timeline& timeline, int i, double eps0,
                                             double eps1);

/// Ids of all fronts lying on the given curves.
std::set<int> curve_fronts(const std::vector<ShockCurve>& curves);

struct JumpSplit {
    AtomicMeasure1D jump;
    AtomicMeasure1D cont;
};

/// Restriction of the i-th wave measure to curve fronts and its remainder.
JumpSplit split_jump_cont(const FluxModel& model, const FrontField& field, int i,
                          const std::set<int>& jump_fronts);

/// Signed source atoms p_k = (outgoing i-weights) - (incoming i-weights) per event.
SpaceTimeAtoms source_measure_mu_i(const Timeline& timeline, int i);

struct JumpSourceAtom {
    SpaceTimeAtom atom;
    NodeCase node = NodeCase::initiation;
};

/// Signed atoms q_k at curve nodes. Throws std::logic_error on a node that
/// fits none of the four cases.
std::vector<JumpSourceAtom> source_measure_mu_jump(const Timeline& timeline, int i,
                                                   const std::vector<ShockCurve>& curves);

/// mu_IC plus |mu_jump| for family i, one atom per event (and per initial node).
SpaceTimeAtoms mu_ICJ(const Timeline& timeline, int i, const std::vector<ShockCurve>& curves);

} // namespace ftrack
