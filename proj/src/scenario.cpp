#include "ftrack/scenario.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace ftrack {

using json = nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------- parsing

namespace {

std::string join(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys)
{
    if (!obj.is_object())
        throw ConfigError(path, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : keys)
            ok = ok || it.key() == k;
        if (!ok)
            throw ConfigError(join(path, it.key()), "unknown key");
    }
}

double as_number(const json& v, const std::string& key)
{
    if (!v.is_number())
        throw ConfigError(key, "expected a number");
    return v.get<double>();
}

double number_or(const json& obj, const std::string& path, const char* key, double def)
{
    return obj.contains(key) ? as_number(obj.at(key), join(path, key)) : def;
}

int int_or(const json& obj, const std::string& path, const char* key, int def)
{
    if (!obj.contains(key))
        return def;
    const json& v = obj.at(key);
    if (!v.is_number_integer())
        throw ConfigError(join(path, key), "expected an integer");
    return v.get<int>();
}

bool bool_or(const json& obj, const std::string& path, const char* key, bool def)
{
    if (!obj.contains(key))
        return def;
    if (!obj.at(key).is_boolean())
        throw ConfigError(join(path, key), "expected true or false");
    return obj.at(key).get<bool>();
}

std::vector<double> numbers(const json& v, const std::string& key)
{
    if (!v.is_array())
        throw ConfigError(key, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t j = 0; j < v.size(); ++j)
        out.push_back(as_number(v[j], key + "[" + std::to_string(j) + "]"));
    return out;
}

std::map<std::string, double> number_map(const json& v, const std::string& key)
{
    if (!v.is_object())
        throw ConfigError(key, "expected an object of numbers");
    std::map<std::string, double> out;
    for (auto it = v.begin(); it != v.end(); ++it)
        out[it.key()] = as_number(it.value(), join(key, it.key()));
    return out;
}

IntervalUnion interval_union(const json& v, const std::string& key)
{
    if (!v.is_array() || v.empty())
        throw ConfigError(key, "expected a non-empty array of [a, b] pairs");
    IntervalUnion u;
    for (std::size_t j = 0; j < v.size(); ++j) {
        const std::vector<double> ab = numbers(v[j], key + "[" + std::to_string(j) + "]");
        if (ab.size() != 2 || !(ab[0] < ab[1]))
            throw ConfigError(key, "intervals are [a, b] with a < b");
        if (!u.empty() && !(u.back().b < ab[0]))
            throw ConfigError(key, "intervals must be disjoint and ascending");
        u.push_back({ab[0], ab[1]});
    }
    return u;
}

std::vector<IntervalUnion> interval_sets(const json& obj, const std::string& path)
{
    std::vector<IntervalUnion> out;
    if (!obj.contains("sets"))
        return out;
    const json& v = obj.at("sets");
    const std::string key = join(path, "sets");
    if (!v.is_array())
        throw ConfigError(key, "expected an array of interval unions");
    for (std::size_t j = 0; j < v.size(); ++j)
        out.push_back(interval_union(v[j], key + "[" + std::to_string(j) + "]"));
    return out;
}

void check_family(int family, const FluxModel& model, const std::string& key)
{
    if (family < 1 || family > model.dim())
        throw ConfigError(key, "family out of range");
}

void check_times(const std::vector<double>& ts, double t_end, const std::string& key)
{
    for (double t : ts) {
        if (!(t >= 0.0) || t > t_end)
            throw ConfigError(key, "times must lie in [0, t_end]");
    }
}

void parse_model(const json& doc, RunConfig& c)
{
    if (!doc.contains("model"))
        throw ConfigError("model", "missing section");
    const json& m = doc.at("model");
    allow_keys(m, "model", {"id", "params"});
    if (!m.contains("id") || !m.at("id").is_string())
        throw ConfigError("model.id", "expected a catalog id string");
    c.model_id = m.at("id").get<std::string>();
    if (m.contains("params"))
        c.model_params = number_map(m.at("params"), "model.params");
}

void parse_initial(const json& doc, RunConfig& c, const FluxModel& model)
{
    if (!doc.contains("initial"))
        throw ConfigError("initial", "missing section");
    const json& in = doc.at("initial");
    allow_keys(in, "initial", {"breakpoints", "states", "profile", "samples", "params"});
    InitialData& d = c.initial;
    if (in.contains("profile")) {
        if (in.contains("breakpoints") || in.contains("states"))
            throw ConfigError("initial", "give either breakpoints or a profile");
        if (!in.at("profile").is_string())
            throw ConfigError("initial.profile", "expected a profile name");
        d.kind = InitialData::Kind::profile;
        d.profile = in.at("profile").get<std::string>();
        const auto ids = profile_ids();
        if (std::find(ids.begin(), ids.end(), d.profile) == ids.end())
            throw ConfigError("initial.profile", "unknown profile '" + d.profile + "'");
        if (!model.scalar())
            throw ConfigError("initial.profile", "named profiles are scalar; use breakpoints");
        d.samples = int_or(in, "initial", "samples", 0);
        if (d.samples < 1)
            throw ConfigError("initial.samples", "must be a positive integer");
        if (in.contains("params"))
            d.profile_params = number_map(in.at("params"), "initial.params");
        try {
            init_sample(model, d, c.epsilon);
        } catch (const RunError&) {
            // Budget overruns are runtime failures, reported by the run itself.
        }
        return;
    }
    if (!in.contains("states"))
        throw ConfigError("initial.states", "missing");
    d.kind = InitialData::Kind::breakpoints;
    d.xs = in.contains("breakpoints") ? numbers(in.at("breakpoints"), "initial.breakpoints")
                                      : std::vector<double>{};
    const json& st = in.at("states");
    if (!st.is_array() || st.size() != d.xs.size() + 1)
        throw ConfigError("initial.states", "need one more state than breakpoints");
    for (std::size_t j = 1; j < d.xs.size(); ++j) {
        if (!(d.xs[j] > d.xs[j - 1]))
            throw ConfigError("initial.breakpoints", "positions must increase strictly");
    }
    for (std::size_t j = 0; j < st.size(); ++j) {
        const std::string key = "initial.states[" + std::to_string(j) + "]";
        std::vector<double> v = st[j].is_number() ? std::vector<double>{st[j].get<double>()}
                                                  : numbers(st[j], key);
        if (static_cast<int>(v.size()) != model.dim())
            throw ConfigError(key, "state dimension does not match the model");
        State s(model.dim());
        for (int k = 0; k < model.dim(); ++k)
            s[k] = v[static_cast<std::size_t>(k)];
        if (!model.domain().contains(s))
            throw ConfigError(key, "state outside the model domain");
        d.states.push_back(s);
    }
}

void parse_numerics(const json& doc, RunConfig& c)
{
    if (!doc.contains("numerics"))
        return;
    const json& n = doc.at("numerics");
    const std::string p = "numerics";
    allow_keys(n, p, {"epsilon", "rho", "eps0", "eps1", "C0", "t_end", "gap_tol", "max_fronts",
                      "max_events"});
    c.epsilon = number_or(n, p, "epsilon", c.epsilon);
    c.t_end = number_or(n, p, "t_end", c.t_end);
    c.eps0 = number_or(n, p, "eps0", c.eps0);
    c.eps1 = number_or(n, p, "eps1", c.eps1);
    c.gap_tol = number_or(n, p, "gap_tol", c.gap_tol);
    if (n.contains("rho") && !(n.at("rho").is_string() && n.at("rho") == "auto"))
        c.rho = as_number(n.at("rho"), "numerics.rho");
    if (n.contains("C0") && !(n.at("C0").is_string() && n.at("C0") == "auto"))
        c.c0 = as_number(n.at("C0"), "numerics.C0");
    const int mf = int_or(n, p, "max_fronts", static_cast<int>(c.max_fronts));
    const int me = int_or(n, p, "max_events", static_cast<int>(c.max_events));
    if (mf < 1)
        throw ConfigError("numerics.max_fronts", "must be positive");
    if (me < 1)
        throw ConfigError("numerics.max_events", "must be positive");
    c.max_fronts = static_cast<std::size_t>(mf);
    c.max_events = static_cast<std::size_t>(me);

    if (!(c.epsilon > 0.0))
        throw ConfigError("numerics.epsilon", "must be positive");
    if (!(c.t_end > 0.0))
        throw ConfigError("numerics.t_end", "must be positive");
    if (!(c.eps0 > 0.0))
        throw ConfigError("numerics.eps0", "must be positive");
    if (!(c.eps0 <= c.eps1))
        throw ConfigError("numerics.eps0", "must not exceed eps1");
    if (c.rho && !(*c.rho >= 0.0))
        throw ConfigError("numerics.rho", "must be nonnegative");
    if (c.c0 && !(*c.c0 >= 0.0))
        throw ConfigError("numerics.C0", "must be nonnegative");
    if (!(c.gap_tol > 0.0))
        throw ConfigError("numerics.gap_tol", "must be positive");
}

DecayPlan parse_decay(const json& v, const std::string& p, const RunConfig& c, const FluxModel& m,
                      bool estimate)
{
    if (estimate)
        allow_keys(v, p, {"family", "tau", "times", "sets", "C"});
    else
        allow_keys(v, p, {"family", "s", "times", "sets", "C"});
    DecayPlan d;
    d.enabled = true;
    d.family = int_or(v, p, "family", 1);
    check_family(d.family, m, join(p, "family"));
    d.s = number_or(v, p, "s", 0.0);
    d.tau = number_or(v, p, "tau", 0.0);
    d.times = v.contains("times") ? numbers(v.at("times"), join(p, "times"))
                                  : std::vector<double>{c.t_end};
    check_times(d.times, c.t_end, join(p, "times"));
    for (double t : d.times) {
        if (estimate && !(d.tau > 0.0 && d.tau < t))
            throw ConfigError(join(p, "tau"), "need 0 < tau < t for every time");
        if (!estimate && !(d.s >= 0.0 && d.s < t))
            throw ConfigError(join(p, "s"), "need 0 <= s < t for every time");
    }
    d.sets = interval_sets(v, p);
    if (v.contains("C"))
        d.C = as_number(v.at("C"), join(p, "C"));
    return d;
}

void parse_diagnostics(const json& doc, Scenario& s, const FluxModel& model)
{
    if (!doc.contains("diagnostics"))
        return;
    const json& d = doc.at("diagnostics");
    const std::string p = "diagnostics";
    allow_keys(d, p, {"glimm_audit", "model_audit", "ladder", "characteristics", "regions",
                      "positive_decay", "decay_estimate", "tame_oscillation", "sbv", "convergence"});
    DiagnosticsPlan& plan = s.diagnostics;
    const RunConfig& c = s.config;
    plan.glimm_audit = bool_or(d, p, "glimm_audit", true);
    plan.model_audit = bool_or(d, p, "model_audit", false);
    if (d.contains("ladder")) {
        plan.ladder = numbers(d.at("ladder"), "diagnostics.ladder");
        for (double e : plan.ladder) {
            if (!(e > 0.0))
                throw ConfigError("diagnostics.ladder", "epsilon values must be positive");
        }
    }
    if (d.contains("characteristics")) {
        const json& arr = d.at("characteristics");
        if (!arr.is_array())
            throw ConfigError("diagnostics.characteristics", "expected an array");
        for (std::size_t j = 0; j < arr.size(); ++j) {
            const std::string q = "diagnostics.characteristics[" + std::to_string(j) + "]";
            allow_keys(arr[j], q, {"family", "t0", "x0", "t1"});
            CharacteristicRequest r;
            r.family = int_or(arr[j], q, "family", 1);
            check_family(r.family, model, q + ".family");
            r.t0 = number_or(arr[j], q, "t0", 0.0);
            r.x0 = number_or(arr[j], q, "x0", 0.0);
            r.t1 = number_or(arr[j], q, "t1", c.t_end);
            if (!(r.t0 >= 0.0 && r.t0 < r.t1 && r.t1 <= c.t_end))
                throw ConfigError(q, "need 0 <= t0 < t1 <= t_end");
            plan.characteristics.push_back(r);
        }
    }
    if (d.contains("regions")) {
        const json& r = d.at("regions");
        const std::string q = "diagnostics.regions";
        allow_keys(r, q, {"random", "seed", "explicit"});
        plan.regions.random = int_or(r, q, "random", 0);
        plan.regions.seed = static_cast<unsigned>(int_or(r, q, "seed", 1));
        if (plan.regions.random < 0)
            throw ConfigError(q + ".random", "must be nonnegative");
        if (r.contains("explicit")) {
            const json& arr = r.at("explicit");
            if (!arr.is_array())
                throw ConfigError(q + ".explicit", "expected an array");
            for (std::size_t j = 0; j < arr.size(); ++j) {
                const std::string e = q + ".explicit[" + std::to_string(j) + "]";
                allow_keys(arr[j], e, {"family", "t0", "tau", "base"});
                Region reg;
                reg.family = int_or(arr[j], e, "family", 1);
                check_family(reg.family, model, e + ".family");
                reg.t0 = number_or(arr[j], e, "t0", 0.0);
                reg.tau = number_or(arr[j], e, "tau", c.t_end - reg.t0);
                if (!(reg.t0 >= 0.0 && reg.tau > 0.0 && reg.t0 + reg.tau <= c.t_end))
                    throw ConfigError(e, "need 0 <= t0 and 0 < tau with t0 + tau <= t_end");
                if (!arr[j].contains("base"))
                    throw ConfigError(e + ".base", "missing");
                reg.base = interval_union(arr[j].at("base"), e + ".base");
                plan.regions.regions.push_back(reg);
            }
        }
    }
    if (d.contains("positive_decay"))
        plan.positive_decay = parse_decay(d.at("positive_decay"), "diagnostics.positive_decay", c, model, false);
    if (d.contains("decay_estimate"))
        plan.decay_estimate = parse_decay(d.at("decay_estimate"), "diagnostics.decay_estimate", c, model, true);
    if (d.contains("tame_oscillation")) {
        const json& t = d.at("tame_oscillation");
        const std::string q = "diagnostics.tame_oscillation";
        allow_keys(t, q, {"triangles", "random", "seed", "C"});
        plan.tame.enabled = true;
        plan.tame.random = int_or(t, q, "random", 0);
        plan.tame.seed = static_cast<unsigned>(int_or(t, q, "seed", 1));
        if (t.contains("C"))
            plan.tame.C = as_number(t.at("C"), q + ".C");
        const double eb = eta_bar(model);
        if (t.contains("triangles")) {
            const json& arr = t.at("triangles");
            if (!arr.is_array())
                throw ConfigError(q + ".triangles", "expected an array");
            for (std::size_t j = 0; j < arr.size(); ++j) {
                const std::string e = q + ".triangles[" + std::to_string(j) + "]";
                allow_keys(arr[j], e, {"tau", "a", "b", "eta"});
                Triangle tr;
                tr.tau = number_or(arr[j], e, "tau", 0.0);
                tr.a = number_or(arr[j], e, "a", -1.0);
                tr.b = number_or(arr[j], e, "b", 1.0);
                tr.eta = number_or(arr[j], e, "eta", eb);
                if (!(tr.a < tr.b) || !(tr.tau >= 0.0 && tr.tau <= c.t_end))
                    throw ConfigError(e, "need a < b and tau in [0, t_end]");
                if (tr.eta < eb)
                    throw ConfigError(e + ".eta", "must be at least " + format_number(eb));
                plan.tame.triangles.push_back(tr);
            }
        }
    }
    if (d.contains("sbv")) {
        const json& v = d.at("sbv");
        const std::string q = "diagnostics.sbv";
        allow_keys(v, q, {"threshold", "times"});
        plan.sbv.enabled = true;
        plan.sbv.threshold = number_or(v, q, "threshold", plan.sbv.threshold);
        if (v.contains("times"))
            plan.sbv.times = numbers(v.at("times"), q + ".times");
        check_times(plan.sbv.times, c.t_end, q + ".times");
    }
    if (d.contains("convergence")) {
        const json& v = d.at("convergence");
        const std::string q = "diagnostics.convergence";
        allow_keys(v, q, {"times"});
        plan.convergence = true;
        plan.convergence_times = v.contains("times") ? numbers(v.at("times"), q + ".times")
                                                     : std::vector<double>{c.t_end};
        check_times(plan.convergence_times, c.t_end, q + ".times");
        if (plan.ladder.size() < 2)
            throw ConfigError("diagnostics.ladder", "convergence needs at least two epsilon values");
        try {
            exact_solution(c);
        } catch (const UnsupportedScenario& e) {
            throw ConfigError(q, e.what());
        }
    }
}

} // namespace

Scenario parse_scenario(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("file", std::string("malformed JSON: ") + e.what());
    }
    allow_keys(doc, "", {"name", "model", "initial", "numerics", "outputs", "diagnostics"});
    Scenario s;
    if (doc.contains("name")) {
        if (!doc.at("name").is_string())
            throw ConfigError("name", "expected a string");
        s.name = doc.at("name").get<std::string>();
    }
    parse_model(doc, s.config);
    const ModelPtr model = make_model(s.config.model_id, s.config.model_params);
    parse_numerics(doc, s.config);
    parse_initial(doc, s.config, *model);
    s.slice_times = {0.0, s.config.t_end};
    if (doc.contains("outputs")) {
        const json& o = doc.at("outputs");
        allow_keys(o, "outputs", {"slice_times"});
        if (o.contains("slice_times")) {
            s.slice_times = numbers(o.at("slice_times"), "outputs.slice_times");
            check_times(s.slice_times, s.config.t_end, "outputs.slice_times");
        }
    }
    parse_diagnostics(doc, s, *model);
    return s;
}

Scenario load_scenario(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("file", "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

// ---------------------------------------------------------------- writers

std::string format_number(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

std::string wave_json(const Front& f)
{
    std::string s = "{\"id\":" + std::to_string(f.id) + ",\"family\":" + std::to_string(f.family) +
                    ",\"kind\":\"" + to_string(f.kind) + "\",\"size\":" + format_number(f.size) +
                    ",\"speed\":" + format_number(f.speed) + "}";
    return s;
}

} // namespace

void write_events_jsonl(std::ostream& os, const Timeline& tl, const GlimmLedger& ledger)
{
    for (const InteractionEvent& e : tl.events) {
        os << "{\"index\":" << e.index << ",\"t\":" << format_number(e.t)
           << ",\"x\":" << format_number(e.x) << ",\"solver\":\"" << to_string(e.solver)
           << "\",\"in\":[";
        for (std::size_t j = 0; j < e.incoming.size(); ++j)
            os << (j ? "," : "") << wave_json(tl.front(e.incoming[j]));
        os << "],\"out\":[";
        for (std::size_t j = 0; j < e.outgoing.size(); ++j)
            os << (j ? "," : "") << wave_json(tl.front(e.outgoing[j]));
        os << "],\"I\":" << format_number(e.amount)
           << ",\"cancellation\":" << format_number(e.cancellation)
           << ",\"dV\":" << format_number(e.dV()) << ",\"dQ\":" << format_number(e.dQ())
           << ",\"dUpsilon\":" << format_number(e.dV() + ledger.c0 * e.dQ()) << "}\n";
    }
}

void write_slices_csv(std::ostream& os, const Timeline& tl, const std::vector<double>& times)
{
    const int n = tl.model->dim();
    os << "t,x,id,family,kind,size,speed";
    for (int k = 1; k <= n; ++k)
        os << ",uL" << k;
    for (int k = 1; k <= n; ++k)
        os << ",uR" << k;
    os << "\n";
    for (double t : times) {
        const FrontField f = tl.slice_at(t);
        for (const Front& fr : f.fronts) {
            os << format_number(t) << ',' << format_number(fr.position(t)) << ',' << fr.id << ','
               << fr.family << ',' << to_string(fr.kind) << ',' << format_number(fr.size) << ','
               << format_number(fr.speed);
            for (int k = 0; k < n; ++k)
                os << ',' << format_number(fr.uL[k]);
            for (int k = 0; k < n; ++k)
                os << ',' << format_number(fr.uR[k]);
            os << "\n";
        }
    }
}

void write_ledger_csv(std::ostream& os, const GlimmLedger& g)
{
    os << "event,t,V,Q,Upsilon,dV,dQ,dUpsilon,I,violation\n";
    const std::set<int> bad(g.violations.begin(), g.violations.end());
    for (std::size_t j = 0; j < g.samples.size(); ++j) {
        const GlimmSample& s = g.samples[j];
        GlimmDelta d;
        d.event = -1;
        if (j > 0)
            d = g.deltas[j - 1];
        os << d.event << ',' << format_number(s.t) << ',' << format_number(s.V) << ','
           << format_number(s.Q) << ',' << format_number(s.upsilon) << ',' << format_number(d.dV)
           << ',' << format_number(d.dQ) << ',' << format_number(d.dUpsilon) << ','
           << format_number(d.amount) << ',' << (bad.count(d.event) ? 1 : 0) << "\n";
    }
}

void write_measures_csv(std::ostream& os, const Timeline& tl,
                        const std::vector<std::vector<ShockCurve>>& curves)
{
    os << "measure,family,event,t,x,w,node\n";
    auto row = [&](const char* name, int family, const SpaceTimeAtom& a, const char* node) {
        os << name << ',' << family << ',' << a.event << ',' << format_number(a.t) << ','
           << format_number(a.x) << ',' << format_number(a.w) << ',' << node << "\n";
    };
    for (const SpaceTimeAtom& a : mu_I(tl).atoms)
        row("mu_I", 0, a, "");
    for (const SpaceTimeAtom& a : mu_IC(tl).atoms)
        row("mu_IC", 0, a, "");
    for (int i = 1; i <= tl.model->dim(); ++i) {
        const auto& cv = curves[static_cast<std::size_t>(i - 1)];
        for (const SpaceTimeAtom& a : source_measure_mu_i(tl, i).atoms)
            row("mu_i", i, a, "");
        for (const JumpSourceAtom& q : source_measure_mu_jump(tl, i, cv))
            row("mu_jump", i, q.atom, to_string(q.node));
        for (const SpaceTimeAtom& a : mu_ICJ(tl, i, cv).atoms)
            row("mu_ICJ", i, a, "");
    }
}

void write_curves_csv(std::ostream& os, const Timeline& tl,
                      const std::vector<std::vector<ShockCurve>>& curves)
{
    os << "curve,family,segment,front,t_start,x_start,t_end,x_end,size\n";
    for (const auto& family : curves) {
        for (const ShockCurve& c : family) {
            for (std::size_t j = 0; j < c.segments.size(); ++j) {
                os << c.id << ',' << c.family << ',' << j << ',' << c.segments[j] << ','
                   << format_number(c.node_t[j]) << ',' << format_number(c.node_x[j]) << ','
                   << format_number(c.node_t[j + 1]) << ',' << format_number(c.node_x[j + 1]) << ','
                   << format_number(tl.front(c.segments[j]).size) << "\n";
            }
        }
    }
}

// ---------------------------------------------------------------- readers

std::vector<EventRow> read_events_jsonl(std::istream& is)
{
    std::vector<EventRow> out;
    std::string line;
    auto waves = [](const json& arr) {
        std::vector<WaveRow> w;
        for (const json& v : arr)
            w.push_back({v.at("id").get<int>(), v.at("family").get<int>(),
                         v.at("kind").get<std::string>(), v.at("size").get<double>(),
                         v.at("speed").get<double>()});
        return w;
    };
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        const json j = json::parse(line);
        EventRow r;
        r.index = j.at("index").get<int>();
        r.t = j.at("t").get<double>();
        r.x = j.at("x").get<double>();
        r.solver = j.at("solver").get<std::string>();
        r.in = waves(j.at("in"));
        r.out = waves(j.at("out"));
        r.I = j.at("I").get<double>();
        r.cancellation = j.at("cancellation").get<double>();
        r.dV = j.at("dV").get<double>();
        r.dQ = j.at("dQ").get<double>();
        r.dUpsilon = j.at("dUpsilon").get<double>();
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SliceRow> read_slices_csv(std::istream& is)
{
    std::vector<SliceRow> out;
    std::string line;
    if (!std::getline(is, line))
        return out;
    const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',') + 1);
    const std::size_t n = (columns - 7) / 2;
    while (std::getline(is, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != columns)
            throw std::runtime_error("read_slices_csv: malformed row");
        SliceRow r;
        r.t = std::stod(cells[0]);
        r.x = std::stod(cells[1]);
        r.id = std::stoi(cells[2]);
        r.family = std::stoi(cells[3]);
        r.kind = cells[4];
        r.size = std::stod(cells[5]);
        r.speed = std::stod(cells[6]);
        for (std::size_t k = 0; k < n; ++k) {
            r.uL.push_back(std::stod(cells[7 + k]));
            r.uR.push_back(std::stod(cells[7 + n + k]));
        }
        out.push_back(std::move(r));
    }
    return out;
}

// ---------------------------------------------------------------- orchestration

namespace {

template <typename F>
void write_file(const fs::path& dir, const std::string& name, RunOutcome& outcome,
                const std::string& prefix, F&& body)
{
    std::ofstream os(dir / name, std::ios::binary);
    body(os);
    outcome.files.push_back(prefix + name);
}

std::pair<double, double> extent(const Timeline& tl)
{
    double lo = 0.0;
    double hi = 0.0;
    bool any = false;
    for (const FrontRecord& r : tl.fronts) {
        if (r.born_event >= 0)
            continue;
        lo = any ? std::min(lo, r.front.x) : r.front.x;
        hi = any ? std::max(hi, r.front.x) : r.front.x;
        any = true;
    }
    if (!any)
        return {-1.0, 1.0};
    return {lo - 0.5, hi + 0.5};
}

json intervals_json(const IntervalUnion& u)
{
    json arr = json::array();
    for (const Interval& iv : u)
        arr.push_back({iv.a, iv.b});
    return arr;
}

std::vector<IntervalUnion> random_sets(const Timeline& tl, double t, unsigned seed, int count)
{
    const FrontField f = tl.slice_at(t);
    double lo = -1.0;
    double hi = 1.0;
    if (!f.fronts.empty()) {
        lo = f.fronts.front().position(t) - 0.25;
        hi = f.fronts.back().position(t) + 0.25;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(lo, hi);
    std::vector<IntervalUnion> out;
    for (int n = 0; n < count; ++n) {
        double a = ux(rng);
        double b = ux(rng);
        if (a > b)
            std::swap(a, b);
        out.push_back({{a, b + 1e-3}});
    }
    return out;
}

struct Member {
    Timeline timeline;
    GlimmLedger ledger;
    std::vector<std::vector<ShockCurve>> curves;
};

// Writes the per-run files and returns the Glimm ledger and curves.
Member write_run(Timeline tl, const Scenario& s, const fs::path& dir, const std::string& prefix,
                 RunOutcome& outcome)
{
    Member m{std::move(tl), {}, {}};
    const RunConfig& c = m.timeline.config;
    m.ledger = glimm_ledger(m.timeline, c.c0);
    for (int i = 1; i <= m.timeline.model->dim(); ++i)
        m.curves.push_back(extract_shock_curves(m.timeline, i, c.eps0, c.eps1));
    fs::create_directories(dir);
    write_file(dir, "events.jsonl", outcome, prefix,
               [&](std::ostream& os) { write_events_jsonl(os, m.timeline, m.ledger); });
    write_file(dir, "slices.csv", outcome, prefix,
               [&](std::ostream& os) { write_slices_csv(os, m.timeline, s.slice_times); });
    write_file(dir, "ledger.csv", outcome, prefix,
               [&](std::ostream& os) { write_ledger_csv(os, m.ledger); });
    write_file(dir, "measures.csv", outcome, prefix,
               [&](std::ostream& os) { write_measures_csv(os, m.timeline, m.curves); });
    write_file(dir, "curves.csv", outcome, prefix,
               [&](std::ostream& os) { write_curves_csv(os, m.timeline, m.curves); });
    return m;
}

json glimm_json(const GlimmLedger& g)
{
    return {{"c0", g.c0},
            {"calibrated", g.calibrated},
            {"monotone", g.monotone()},
            {"violations", g.violations},
            {"upsilon0", g.upsilon0()}};
}

json decay_json(const DecayReport& r, double t, const std::optional<double>& C)
{
    json cases = json::array();
    for (const DecayCase& c : r.cases)
        cases.push_back({{"set", intervals_json(c.set)}, {"value", c.value}, {"base", c.base}, {"ratio", c.ratio}});
    json j = {{"t", t}, {"family", r.family}, {"C_fitted", r.C}, {"cases", cases}};
    if (C)
        j["holds"] = r.holds(*C);
    return j;
}

void run_diagnostics(const Scenario& s, const Member& m, json& diag, RunOutcome& outcome)
{
    const Timeline& tl = m.timeline;
    const DiagnosticsPlan& plan = s.diagnostics;
    const int n = tl.model->dim();
    auto fail = [&](const std::string& what) { outcome.audit_failures.push_back(what); };

    const InteractionFit fit = fit_interaction_constants(tl);
    diag["interaction_fit"] = {{"c", fit.c}, {"K", fit.K}, {"events", fit.events}};

    json balance = json::array();
    std::vector<BalanceConstants> constants;
    for (int i = 1; i <= n; ++i) {
        constants.push_back(fit_balance_constants(tl, i));
        balance.push_back({{"family", i}, {"C_I", constants.back().C_I}, {"C_IC", constants.back().C_IC}});
    }
    diag["balance_constants"] = balance;

    if (!plan.characteristics.empty()) {
        json arr = json::array();
        for (const CharacteristicRequest& r : plan.characteristics) {
            const CharCurve c = min_characteristic(tl, r.family, r.t0, r.x0, r.t1);
            arr.push_back({{"family", r.family}, {"t", c.ts}, {"x", c.xs}, {"slopes", c.slopes}});
        }
        diag["characteristics"] = arr;
    }

    std::vector<Region> regions = plan.regions.regions;
    if (plan.regions.random > 0) {
        std::mt19937_64 rng(plan.regions.seed);
        const auto [lo, hi] = extent(tl);
        std::uniform_real_distribution<double> ux(lo, hi);
        std::uniform_real_distribution<double> ut(0.0, 0.5 * tl.t_end());
        for (int i = 1; i <= n; ++i) {
            for (int k = 0; k < plan.regions.random; ++k) {
                std::vector<double> pts{ux(rng), ux(rng), ux(rng), ux(rng)};
                std::sort(pts.begin(), pts.end());
                Region r;
                r.family = i;
                r.t0 = ut(rng);
                r.tau = 0.5 * tl.t_end();
                r.base = {{pts[0], pts[1] + 1e-3}};
                if (pts[2] > pts[1] + 1e-3)
                    r.base.push_back({pts[2], pts[3] + 1e-3});
                regions.push_back(r);
            }
        }
    }
    if (!regions.empty()) {
        json arr = json::array();
        std::size_t failed = 0;
        for (const Region& r : regions) {
            const BalanceReport b = region_balance_check(tl, r, constants[static_cast<std::size_t>(r.family - 1)]);
            failed += b.passed() ? 0 : 1;
            json flux = json::array();
            for (const FluxAtom& a : b.flux)
                flux.push_back({{"event", a.event}, {"t", a.t}, {"x", a.x}, {"phi", a.phi}, {"mu_ic", a.mu_ic}});
            arr.push_back({{"family", r.family},
                           {"t0", r.t0},
                           {"tau", r.tau},
                           {"base", intervals_json(r.base)},
                           {"W_in", b.w_in},
                           {"W_out", b.w_out},
                           {"W_in_pos", b.w_in_pos},
                           {"W_out_pos", b.w_out_pos},
                           {"W_in_neg", b.w_in_neg},
                           {"W_out_neg", b.w_out_neg},
                           {"sources", b.sources},
                           {"mu_I", b.mu_I},
                           {"mu_IC", b.mu_IC},
                           {"identity_defect", b.identity_defect},
                           {"flux", flux},
                           {"passed", b.passed()},
                           {"failures", b.failures}});
        }
        diag["regions"] = arr;
        if (failed > 0)
            fail("region balance: " + std::to_string(failed) + " of " + std::to_string(regions.size()) + " regions failed");
    }

    auto decay_sets = [&](const DecayPlan& p, double t) {
        return p.sets.empty() ? random_sets(tl, t, 1, 20) : p.sets;
    };
    if (plan.positive_decay.enabled) {
        const DecayPlan& p = plan.positive_decay;
        json arr = json::array();
        for (double t : p.times) {
            const DecayReport r = positive_decay_check(tl, p.family, p.s, t, decay_sets(p, t));
            arr.push_back(decay_json(r, t, p.C));
            if (p.C && !r.holds(*p.C))
                fail("positive decay fails at t = " + format_number(t));
        }
        diag["positive_decay"] = arr;
    }
    if (plan.decay_estimate.enabled) {
        const DecayPlan& p = plan.decay_estimate;
        const auto& cv = m.curves[static_cast<std::size_t>(p.family - 1)];
        json arr = json::array();
        for (double t : p.times) {
            const DecayReport r = decay_estimate_check(tl, p.family, t, p.tau, decay_sets(p, t), cv);
            arr.push_back(decay_json(r, t, p.C));
            if (p.C && !r.holds(*p.C))
                fail("decay estimate fails at t = " + format_number(t));
        }
        diag["decay_estimate"] = arr;
    }
    if (plan.tame.enabled) {
        std::vector<Triangle> tris = plan.tame.triangles;
        const double eb = eta_bar(*tl.model);
        if (plan.tame.random > 0) {
            std::mt19937_64 rng(plan.tame.seed);
            const auto [lo, hi] = extent(tl);
            std::uniform_real_distribution<double> ux(lo, hi);
            std::uniform_real_distribution<double> ut(0.0, tl.t_end());
            for (int k = 0; k < plan.tame.random; ++k) {
                double a = ux(rng);
                double b = ux(rng);
                if (a > b)
                    std::swap(a, b);
                tris.push_back({ut(rng), a, b + 1e-3, eb});
            }
        }
        const OscillationReport r = tame_oscillation_check(tl, tris);
        json cases = json::array();
        for (const OscillationCase& c : r.cases)
            cases.push_back({{"tau", c.triangle.tau},
                             {"a", c.triangle.a},
                             {"b", c.triangle.b},
                             {"eta", c.triangle.eta},
                             {"oscillation", c.oscillation},
                             {"base_variation", c.base_variation},
                             {"ratio", c.ratio}});
        diag["tame_oscillation"] = {{"eta_bar", r.eta_bar}, {"C_fitted", r.C}, {"cases", cases}};
        if (plan.tame.C && r.C > *plan.tame.C)
            fail("tame oscillation ratio " + format_number(r.C) + " exceeds C'");
    }
    if (plan.sbv.enabled) {
        json arr = json::array();
        for (int i = 1; i <= n; ++i) {
            const SbvReport r = sbv_atom_report(tl, i, m.curves[static_cast<std::size_t>(i - 1)],
                                                plan.sbv.threshold, plan.sbv.times);
            json slices = json::array();
            for (const SpectrumSlice& sl : r.spectrum) {
                json atoms = json::array();
                for (const Atom1D& a : sl.atoms.atoms)
                    atoms.push_back({a.x, a.w});
                slices.push_back({{"t", sl.t}, {"atoms", atoms}});
            }
            arr.push_back({{"family", i},
                           {"threshold", r.threshold},
                           {"exceptional_times", r.exceptional_times},
                           {"masses", r.masses},
                           {"spectrum", slices}});
        }
        diag["sbv"] = arr;
    }
}

void write_manifest(const fs::path& dir, const RunOutcome& o, bool complete)
{
    json man = {{"complete", complete},
                {"exit_code", o.exit_code},
                {"files", o.files},
                {"audit_failures", o.audit_failures},
                {"error", o.error}};
    std::ofstream(dir / "manifest.json", std::ios::binary) << man.dump(2) << "\n";
}

} // namespace

RunOutcome orchestrate(const Scenario& s, const fs::path& out_dir)
{
    RunOutcome outcome;
    fs::create_directories(out_dir);
    json diag;
    diag["scenario"] = s.name;
    diag["model"] = s.config.model_id;
    diag["epsilon"] = s.config.epsilon;
    diag["rho"] = s.config.threshold();
    diag["t_end"] = s.config.t_end;

    ModelPtr model;
    try {
        model = make_model(s.config.model_id, s.config.model_params);
    } catch (const ConfigError& e) {
        outcome.exit_code = exit_config;
        outcome.error = e.what();
        write_manifest(out_dir, outcome, false);
        return outcome;
    }

    if (s.diagnostics.model_audit) {
        try {
            const GnlAuditReport r = gnl_audit(*model, 64);
            diag["model_audit"] = {{"passed", true}};
            (void)r;
        } catch (const ModelAuditError& e) {
            diag["model_audit"] = {{"passed", false}, {"error", e.what()}};
            outcome.audit_failures.push_back(e.what());
        }
    }

    std::optional<Tracker> tracker;
    try {
        tracker.emplace(model, s.config);
        while (tracker->step() != nullptr) {
        }
    } catch (const ConfigError& e) {
        outcome.exit_code = exit_config;
        outcome.error = e.what();
        write_manifest(out_dir, outcome, false);
        return outcome;
    } catch (const std::exception& e) {
        outcome.exit_code = exit_runtime;
        outcome.error = e.what();
        if (tracker) {
            const Timeline& partial = tracker->timeline();
            const GlimmLedger g = glimm_ledger(partial, s.config.c0.value_or(1.0));
            write_file(out_dir, "events.jsonl", outcome, "",
                       [&](std::ostream& os) { write_events_jsonl(os, partial, g); });
            write_file(out_dir, "ledger.csv", outcome, "",
                       [&](std::ostream& os) { write_ledger_csv(os, g); });
        }
        write_manifest(out_dir, outcome, false);
        return outcome;
    }

    try {
        const Member base = write_run(tracker->finish(), s, out_dir, "", outcome);
        diag["events"] = base.timeline.events.size();
        diag["glimm"] = glimm_json(base.ledger);
        if (s.diagnostics.glimm_audit && !base.ledger.monotone())
            outcome.audit_failures.push_back("glimm: " + std::to_string(base.ledger.violations.size()) +
                                             " events violate monotonicity with C0 = " +
                                             format_number(base.ledger.c0));
        run_diagnostics(s, base, diag, outcome);

        if (!s.diagnostics.ladder.empty()) {
            json ladder = json::array();
            for (double eps : s.diagnostics.ladder) {
                RunConfig c = s.config;
                c.epsilon = eps;
                char tag[32];
                std::snprintf(tag, sizeof tag, "%g", eps);
                const std::string sub = std::string("ladder/eps_") + tag;
                const Member mem = write_run(run(c), s, out_dir / sub, sub + "/", outcome);
                double v_max = 0.0;
                for (const GlimmSample& g : mem.ledger.samples)
                    v_max = std::max(v_max, g.V);
                ladder.push_back({{"epsilon", eps},
                                  {"dir", sub},
                                  {"events", mem.timeline.events.size()},
                                  {"glimm", glimm_json(mem.ledger)},
                                  {"v_max", v_max},
                                  {"nonphysical_end", nonphysical_total(mem.timeline.slice_at(c.t_end))}});
                if (s.diagnostics.glimm_audit && !mem.ledger.monotone())
                    outcome.audit_failures.push_back("glimm: ladder member " + format_number(eps) +
                                                     " violates monotonicity");
            }
            diag["ladder"] = ladder;
        }
        if (s.diagnostics.convergence) {
            const ConvergenceReport r =
                convergence_study(s.config, s.diagnostics.ladder, s.diagnostics.convergence_times);
            json members = json::array();
            for (const LadderMember& lm : r.members)
                members.push_back({{"epsilon", lm.epsilon},
                                   {"errors", lm.errors},
                                   {"upsilon0", lm.upsilon0},
                                   {"v_max", lm.v_max},
                                   {"nonphysical_end", lm.nonphysical_end}});
            diag["convergence"] = {{"times", r.times}, {"members", members}, {"orders", r.orders}};
        }
    } catch (const std::logic_error& e) {
        outcome.audit_failures.push_back(e.what());
    } catch (const std::exception& e) {
        outcome.exit_code = exit_runtime;
        outcome.error = e.what();
        diag["error"] = e.what();
        write_file(out_dir, "diagnostics.json", outcome, "",
                   [&](std::ostream& os) { os << diag.dump(2) << "\n"; });
        write_manifest(out_dir, outcome, false);
        return outcome;
    }

    diag["audit_failures"] = outcome.audit_failures;
    write_file(out_dir, "diagnostics.json", outcome, "",
               [&](std::ostream& os) { os << diag.dump(2) << "\n"; });
    outcome.exit_code = outcome.audit_failures.empty() ? exit_ok : exit_audit;
    write_manifest(out_dir, outcome, true);
    return outcome;
}

} // namespace ftrack
