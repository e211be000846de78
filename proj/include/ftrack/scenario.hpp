#pragma once

#include "ftrack/diagnostics.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ftrack {

struct CharacteristicRequest {
    int family = 1;
    double t0 = 0.0;
    double x0 = 0.0;
    double t1 = 0.0;
};

/// Explicit regions plus `random` regions per family drawn with `seed`.
struct RegionPlan {
    std::vector<Region> regions;
    int random = 0;
    unsigned seed = 1;
};

struct DecayPlan {
    bool enabled = false;
    int family = 1;
    double s = 0.0;   ///< positive decay: start time
    double tau = 0.0; ///< decay estimate: window half-width
    std::vector<double> times;
    std::vector<IntervalUnion> sets;
    std::optional<double> C; ///< audited constant; report-only when unset
};

struct TamePlan {
    bool enabled = false;
    std::vector<Triangle> triangles;
    int random = 0;
    unsigned seed = 1;
    std::optional<double> C;
};

struct SbvPlan {
    bool enabled = false;
    double threshold = 1e-6;
    std::vector<double> times;
};

struct DiagnosticsPlan {
    bool glimm_audit = true;
    bool model_audit = false;
    std::vector<double> ladder;
    std::vector<CharacteristicRequest> characteristics;
    RegionPlan regions;
    DecayPlan positive_decay;
    DecayPlan decay_estimate;
    TamePlan tame;
    SbvPlan sbv;
    bool convergence = false;
    std::vector<double> convergence_times;
};

struct Scenario {
    std::string name;
    RunConfig config;
    std::vector<double> slice_times; ///< defaults to {0, t_end}
    DiagnosticsPlan diagnostics;
};

/// Parses and validates a JSON scenario document. Throws ConfigError naming
/// the offending key.
Scenario parse_scenario(const std::string& text);

/// Reads and parses a scenario file. Unreadable files raise ConfigError("file").
Scenario load_scenario(const std::filesystem::path& path);

enum ExitCode { exit_ok = 0, exit_audit = 2, exit_config = 3, exit_runtime = 4 };

struct RunOutcome {
    int exit_code = exit_ok;
    std::vector<std::string> audit_failures;
    std::string error;
    std::vector<std::string> files; ///< relative to the output directory
};

/// Runs the scenario (and its ladder), evaluates the requested diagnostics and
/// writes all artifacts below `out_dir`.
RunOutcome orchestrate(const Scenario& scenario, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------- file formats

/// Fixed 17-significant-digit decimal form.
std::string format_number(double v);

void write_events_jsonl(std::ostream& os, const Timeline& timeline, const GlimmLedger& ledger);
void write_slices_csv(std::ostream& os, const Timeline& timeline, const std::vector<double>& times);
void write_ledger_csv(std::ostream& os, const GlimmLedger& ledger);
void write_measures_csv(std::ostream& os, const Timeline& timeline,
                        const std::vector<std::vector<ShockCurve>>& curves);
void write_curves_csv(std::ostream& os, const Timeline& timeline,
                      const std::vector<std::vector<ShockCurve>>& curves);

struct WaveRow {
    int id = 0;
    int family = 0;
    std::string kind;
    double size = 0.0;
    double speed = 0.0;
};

struct EventRow {
    int index = 0;
    double t = 0.0;
    double x = 0.0;
    std::string solver;
    std::vector<WaveRow> in;
    std::vector<WaveRow> out;
    double I = 0.0;
    double cancellation = 0.0;
    double dV = 0.0;
    double dQ = 0.0;
    double dUpsilon = 0.0;
};

struct SliceRow {
    double t = 0.0;
    double x = 0.0;
    int id = 0;
    int family = 0;
    std::string kind;
    double size = 0.0;
    double speed = 0.0;
    std::vector<double> uL;
    std::vector<double> uR;
};

std::vector<EventRow> read_events_jsonl(std::istream& is);
std::vector<SliceRow> read_slices_csv(std::istream& is);

} // namespace ftrack
