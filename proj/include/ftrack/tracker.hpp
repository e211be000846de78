#pragma once

#include "ftrack/riemann.hpp"

#include <array>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ftrack {

/// Piecewise-constant solution at one time. Fronts are ordered left to right.
struct FrontField {
    double time = 0.0;
    State left_state;
    std::vector<Front> fronts;

    State right_state() const { return fronts.empty() ? left_state : fronts.back().uR; }
};

/// Initial datum: exact breakpoints or a named scalar profile sampled at cell midpoints.
struct InitialData {
    enum class Kind { breakpoints, profile };
    Kind kind = Kind::breakpoints;

    std::vector<double> xs;    ///< breakpoints, strictly increasing
    std::vector<State> states; ///< xs.size() + 1 constant states

    std::string profile;
    int samples = 0;
    std::map<std::string, double> profile_params;
};

/// Names accepted in InitialData::profile.
std::vector<std::string> profile_ids();

enum class SolverUsed { accurate, simplified, crude };

const char* to_string(SolverUsed s);

struct RunConfig {
    std::string model_id = "burgers";
    std::map<std::string, double> model_params;
    InitialData initial;
    double epsilon = 0.05;
    std::optional<double> rho; ///< interaction threshold; epsilon^3 when unset
    double t_end = 1.0;
    double eps0 = 0.05;
    double eps1 = 0.1;
    std::optional<double> c0; ///< Glimm constant; calibrated when unset
    double gap_tol = 1e-8;
    std::size_t max_fronts = 20000;
    std::size_t max_events = 200000;

    double threshold() const { return rho ? *rho : epsilon * epsilon * epsilon; }
};

struct InteractionEvent {
    int index = 0;
    double t = 0.0;
    double x = 0.0;
    std::array<int, 2> incoming{-1, -1};
    std::vector<int> outgoing;
    SolverUsed solver = SolverUsed::accurate;
    double amount = 0.0;
    double cancellation = 0.0;
    double v_before = 0.0;
    double v_after = 0.0;
    double q_before = 0.0;
    double q_after = 0.0;

    double dV() const { return v_after - v_before; }
    double dQ() const { return q_after - q_before; }
};

/// A front together with its lifetime in the timeline.
struct FrontRecord {
    Front front;
    double died_at = std::numeric_limits<double>::infinity();
    int born_event = -1; ///< -1: created by the initial data
    int died_event = -1; ///< -1: alive at t_end
};

/// Complete event history of one run.
class Timeline {
public:
    ModelPtr model;
    RunConfig config;
    FrontField initial;
    std::vector<FrontRecord> fronts; ///< indexed by front id
    std::vector<InteractionEvent> events;
    /// orders[0] is the initial front order, orders[k + 1] the order after event k.
    std::vector<std::vector<int>> orders;
    double initial_l1_sampling_error = 0.0;
    std::size_t perturbed_fronts = 0;

    double t_end() const { return config.t_end; }
    const Front& front(int id) const { return fronts.at(static_cast<std::size_t>(id)).front; }

    /// Field at time t; event times resolve to the post-event field.
    FrontField slice_at(double t) const;

    /// Field right after event k (k = -1: initial field).
    FrontField field_after(int k) const;
};

struct Collision {
    double t = 0.0;
    double x = 0.0;
    std::size_t left_index = 0; ///< index of the left front in the field
};

/// Earliest collision among adjacent approaching fronts; ties at equal times
/// resolve to the leftmost pair.
std::optional<Collision> next_collision(const FrontField& field,
                                        double tie_tol = 0.0);

/// Piecewise-constant initial field; each jump is expanded by the accurate solver.
/// Throws RunError when the data exceed the model's total-variation budget.
FrontField init_sample(const FluxModel& model, const InitialData& data, double eps,
                       double* l1_error = nullptr);

/// Event-driven evolution. One `step` resolves exactly one binary interaction.
class Tracker {
public:
    Tracker(ModelPtr model, RunConfig config);

    /// Resolves the next interaction at or before t_end. Returns nullptr once quiescent.
    const InteractionEvent* step();

    const FrontField& field() const { return field_; }
    const Timeline& timeline() const { return timeline_; }

    /// Runs to t_end and hands over the timeline.
    Timeline finish();

private:
    int register_front(Front f, int born_event);
    void perturb(const std::vector<std::size_t>& indices, double now);

    ModelPtr model_;
    FrontField field_;
    Timeline timeline_;
    double delta_ = 0.0;
    double tie_tol_ = 0.0;
};

/// Convenience: builds the model from the config and runs to t_end.
Timeline run(const RunConfig& config);

} // namespace ftrack
