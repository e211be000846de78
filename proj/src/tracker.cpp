#include "ftrack/tracker.hpp"

#include "ftrack/measures.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace ftrack {

const char* to_string(SolverUsed s)
{
    switch (s) {
    case SolverUsed::accurate:
        return "accurate";
    case SolverUsed::simplified:
        return "simplified";
    case SolverUsed::crude:
        return "crude";
    }
    return "?";
}

std::vector<std::string> profile_ids() { return {"constant", "linear_ramp", "sawtooth", "sine"}; }

namespace {

double param(const std::map<std::string, double>& p, const char* key, double fallback)
{
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

/// Scalar profile u0(x); compactly supported perturbation of `base` on [-w, w].
struct Profile {
    std::string id;
    double base = 0.0;
    double w = 1.0;
    double slope = 1.0;
    double amplitude = 0.5;
    double teeth = 3.0;
    double frequency = 1.0;

    double operator()(double x) const
    {
        if (id == "constant" || x < -w || x > w)
            return base;
        if (id == "linear_ramp")
            return base - slope * x;
        if (id == "sawtooth") {
            const double phase = (x + w) * teeth / (2.0 * w);
            const double frac = phase - std::floor(phase);
            return base + amplitude * (2.0 * frac - 1.0);
        }
        return base + amplitude * std::sin(std::numbers::pi * frequency * x);
    }
};

Profile make_profile(const InitialData& data)
{
    const auto& ids = profile_ids();
    if (std::find(ids.begin(), ids.end(), data.profile) == ids.end())
        throw ConfigError("initial.profile", "unknown profile '" + data.profile + "'");
    Profile p;
    p.id = data.profile;
    const auto& pp = data.profile_params;
    for (const auto& [key, value] : pp) {
        static const char* known[] = {"base", "half_width", "slope", "amplitude", "teeth", "frequency"};
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known))
            throw ConfigError("initial.params." + key, "unknown profile parameter");
    }
    p.base = param(pp, "base", 0.0);
    p.w = param(pp, "half_width", 1.0);
    p.slope = param(pp, "slope", 1.0);
    p.amplitude = param(pp, "amplitude", 0.5);
    p.teeth = param(pp, "teeth", 3.0);
    p.frequency = param(pp, "frequency", 1.0);
    if (!(p.w > 0.0))
        throw ConfigError("initial.params.half_width", "must be positive");
    return p;
}

double approach_time(const Front& a, const Front& b, double now)
{
    const double gap = b.position(now) - a.position(now);
    return now + std::max(0.0, gap / (a.speed - b.speed));
}

} // namespace

FrontField init_sample(const FluxModel& model, const InitialData& data, double eps,
                       double* l1_error)
{
    std::vector<double> xs;
    std::vector<State> states;
    double l1 = 0.0;
    if (data.kind == InitialData::Kind::breakpoints) {
        xs = data.xs;
        states = data.states;
        if (states.size() != xs.size() + 1)
            throw ConfigError("initial.breakpoints", "need one more state than breakpoints");
        for (std::size_t j = 1; j < xs.size(); ++j) {
            if (!(xs[j] > xs[j - 1]))
                throw ConfigError("initial.breakpoints", "positions must increase strictly");
        }
    } else {
        if (!model.scalar())
            throw ConfigError("initial.profile", "named profiles are scalar; use breakpoints");
        if (data.samples < 1)
            throw ConfigError("initial.samples", "must be at least 1");
        const Profile p = make_profile(data);
        const int n = data.samples;
        const double h = 2.0 * p.w / n;
        State outside(1);
        outside[0] = p.base;
        states.push_back(outside);
        using Rule = boost::math::quadrature::gauss<double, 20>;
        for (int j = 0; j < n; ++j) {
            const double lo = -p.w + j * h;
            const double mid = lo + 0.5 * h;
            xs.push_back(lo);
            State s(1);
            s[0] = p(mid);
            states.push_back(s);
            // The integrand has a kink at the sample point.
            auto err = [&](double x) { return std::abs(p(x) - s[0]); };
            l1 += Rule::integrate(err, lo, mid) + Rule::integrate(err, mid, lo + h);
        }
        xs.push_back(p.w);
        states.push_back(outside);
    }
    if (l1_error)
        *l1_error = l1;

    const int dim = model.dim();
    double tv = 0.0;
    for (std::size_t j = 0; j < states.size(); ++j) {
        if (states[j].size() != dim)
            throw ConfigError("initial.breakpoints", "state dimension does not match the model");
        if (!model.domain().contains(states[j]))
            throw ConfigError("initial.breakpoints", "state outside the model domain");
        if (j > 0)
            tv += (states[j] - states[j - 1]).norm();
    }
    if (tv > model.tv_budget()) {
        std::ostringstream os;
        os << "initial total variation " << tv << " exceeds the small-BV budget "
           << model.tv_budget() << " of model " << model.id();
        throw RunError(os.str());
    }

    FrontField field;
    field.time = 0.0;
    field.left_state = states.front();
    for (std::size_t j = 0; j < xs.size(); ++j) {
        if ((states[j].array() == states[j + 1].array()).all())
            continue;
        WaveFan fan = solve_accurate(model, states[j], states[j + 1], eps);
        for (Front& f : fan.fronts) {
            f.x = xs[j];
            f.born_at = 0.0;
            field.fronts.push_back(std::move(f));
        }
    }
    return field;
}

std::optional<Collision> next_collision(const FrontField& field, double tie_tol)
{
    const auto& fr = field.fronts;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> times(fr.size() > 0 ? fr.size() - 1 : 0,
                              std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j + 1 < fr.size(); ++j) {
        if (fr[j].speed > fr[j + 1].speed) {
            times[j] = approach_time(fr[j], fr[j + 1], field.time);
            best = std::min(best, times[j]);
        }
    }
    if (!std::isfinite(best))
        return std::nullopt;
    for (std::size_t j = 0; j < times.size(); ++j) {
        if (times[j] <= best + tie_tol) {
            Collision c;
            c.t = times[j];
            c.x = fr[j].position(c.t);
            c.left_index = j;
            return c;
        }
    }
    return std::nullopt;
}

FrontField Timeline::field_after(int k) const
{
    FrontField f;
    f.left_state = initial.left_state;
    f.time = k < 0 ? 0.0 : events.at(static_cast<std::size_t>(k)).t;
    for (int id : orders.at(static_cast<std::size_t>(k + 1)))
        f.fronts.push_back(front(id));
    return f;
}

FrontField Timeline::slice_at(double t) const
{
    if (!(t >= 0.0) || t > t_end() * (1.0 + 1e-12))
        throw std::out_of_range("slice_at: time outside [0, t_end]");
    auto it = std::upper_bound(events.begin(), events.end(), t,
                               [](double v, const InteractionEvent& e) { return v < e.t; });
    const int k = static_cast<int>(it - events.begin()) - 1;
    FrontField f = field_after(k);
    f.time = t;
    return f;
}

Tracker::Tracker(ModelPtr model, RunConfig config) : model_(std::move(model))
{
    if (!(config.epsilon > 0.0))
        throw ConfigError("numerics.epsilon", "must be positive");
    if (!(config.t_end > 0.0))
        throw ConfigError("numerics.t_end", "must be positive");
    if (!(config.eps0 > 0.0))
        throw ConfigError("numerics.eps0", "must be positive");
    if (!(config.eps0 <= config.eps1))
        throw ConfigError("numerics.eps0", "must not exceed eps1");
    if (config.rho && !(*config.rho >= 0.0))
        throw ConfigError("numerics.rho", "must be nonnegative");

    timeline_.model = model_;
    timeline_.config = config;
    field_ = init_sample(*model_, config.initial, config.epsilon,
                         &timeline_.initial_l1_sampling_error);
    std::vector<int> order;
    for (Front& f : field_.fronts) {
        f.id = register_front(f, -1);
        order.push_back(f.id);
    }
    timeline_.initial = field_;
    timeline_.orders.push_back(std::move(order));
    const auto& fences = model_->fences();
    delta_ = std::ldexp(fences.back() - fences.front(), -40);
    tie_tol_ = 1e-13 * config.t_end;
}

int Tracker::register_front(Front f, int born_event)
{
    if (timeline_.fronts.size() >= timeline_.config.max_fronts)
        throw RunError("front-count safety cap exceeded (check rho)");
    f.id = static_cast<int>(timeline_.fronts.size());
    FrontRecord rec;
    rec.front = std::move(f);
    rec.born_event = born_event;
    timeline_.fronts.push_back(std::move(rec));
    return timeline_.fronts.back().front.id;
}

void Tracker::perturb(const std::vector<std::size_t>& indices, double now)
{
    int m = 0;
    for (std::size_t idx : indices) {
        ++m;
        Front& f = field_.fronts[idx];
        if (!(f.born_at < now - tie_tol_))
            continue;
        f.speed += m * delta_;
        timeline_.fronts[static_cast<std::size_t>(f.id)].front.speed = f.speed;
        ++timeline_.perturbed_fronts;
    }
}

const InteractionEvent* Tracker::step()
{
    const RunConfig& cfg = timeline_.config;
    std::optional<Collision> c;
    int rounds = 0;
    while (true) {
        c = next_collision(field_, tie_tol_);
        if (!c || c->t > cfg.t_end)
            return nullptr;
        // A chain of adjacent pairs meeting at the same time shares fronts:
        // separate it by speed perturbation once, then resolve left to right.
        const auto& fr = field_.fronts;
        std::size_t j1 = c->left_index;
        while (j1 + 2 < fr.size() && fr[j1 + 1].speed > fr[j1 + 2].speed &&
               approach_time(fr[j1 + 1], fr[j1 + 2], field_.time) <= c->t + tie_tol_)
            ++j1;
        if (j1 == c->left_index || rounds == 3)
            break;
        std::vector<std::size_t> idx;
        for (std::size_t p = c->left_index + 1; p <= j1 + 1; ++p)
            idx.push_back(p);
        ++rounds;
        const std::size_t before = timeline_.perturbed_fronts;
        perturb(idx, c->t);
        if (timeline_.perturbed_fronts == before)
            break;
        c.reset();
    }

    const std::size_t j = c->left_index;
    const double t = std::max(c->t, field_.time);
    const Front left = field_.fronts[j];
    const Front right = field_.fronts[j + 1];
    const double x = left.position(t);
    const int k = static_cast<int>(timeline_.events.size());

    InteractionEvent ev;
    ev.index = k;
    ev.t = t;
    ev.x = x;
    ev.incoming = {left.id, right.id};
    const InteractionAmount ia = interaction_amount(left, right);
    ev.amount = ia.amount;
    ev.cancellation = ia.cancellation;
    ev.v_before = total_variation_V(field_.fronts);
    ev.q_before = glimm_Q(field_.fronts);

    WaveFan fan;
    try {
        if (left.nonphysical()) {
            if (right.nonphysical())
                throw RunError("two nonphysical fronts collided");
            ev.solver = SolverUsed::crude;
            fan = solve_crude(*model_, left, right);
        } else if (right.nonphysical()) {
            throw RunError("a physical front overtook a nonphysical front");
        } else {
            const bool general = model_->field_kind(left.family) == FieldKind::general ||
                                 model_->field_kind(right.family) == FieldKind::general;
            if (general || ev.amount > cfg.threshold()) {
                ev.solver = SolverUsed::accurate;
                fan = solve_accurate(*model_, left.uL, right.uR, cfg.epsilon);
            } else {
                ev.solver = SolverUsed::simplified;
                fan = solve_simplified(*model_, left, right);
            }
        }
    } catch (const std::exception& e) {
        std::ostringstream os;
        os << "event " << k << " at t = " << t << ", x = " << x << " (fronts " << left.id << ", "
           << right.id << "): " << e.what();
        throw RunError(os.str());
    }

    std::vector<Front> outgoing;
    for (Front& f : fan.fronts) {
        f.x = x;
        f.born_at = t;
        f.id = register_front(f, k);
        ev.outgoing.push_back(f.id);
        outgoing.push_back(f);
    }
    for (const Front* in : {&left, &right}) {
        FrontRecord& rec = timeline_.fronts[static_cast<std::size_t>(in->id)];
        rec.died_at = t;
        rec.died_event = k;
    }
    auto& fr = field_.fronts;
    fr.erase(fr.begin() + static_cast<std::ptrdiff_t>(j), fr.begin() + static_cast<std::ptrdiff_t>(j) + 2);
    fr.insert(fr.begin() + static_cast<std::ptrdiff_t>(j), outgoing.begin(), outgoing.end());
    field_.time = t;

    ev.v_after = total_variation_V(field_.fronts);
    ev.q_after = glimm_Q(field_.fronts);
    std::vector<int> order;
    order.reserve(fr.size());
    for (const Front& f : fr)
        order.push_back(f.id);
    timeline_.orders.push_back(std::move(order));
    timeline_.events.push_back(std::move(ev));
    if (timeline_.events.size() >= cfg.max_events)
        throw RunError("event-count safety cap exceeded (check rho)");
    return &timeline_.events.back();
}

Timeline Tracker::finish()
{
    while (step() != nullptr) {
    }
    field_.time = timeline_.config.t_end;
    return std::move(timeline_);
}

Timeline run(const RunConfig& config)
{
    Tracker tracker(make_model(config.model_id, config.model_params), config);
    return tracker.finish();
}

} // namespace ftrack
