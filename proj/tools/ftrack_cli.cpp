#include "ftrack/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace ftrack;

namespace {

int run_command(const std::string& file, const std::string& out)
{
    Scenario s;
    try {
        s = load_scenario(file);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }
    const RunOutcome o = orchestrate(s, out);
    for (const std::string& f : o.audit_failures)
        std::cerr << "audit: " << f << "\n";
    if (!o.error.empty())
        std::cerr << "error: " << o.error << "\n";
    std::cout << "wrote " << o.files.size() << " files to " << out << " (exit " << o.exit_code
              << ")\n";
    return o.exit_code;
}

int check_command(const std::string& file)
{
    try {
        const Scenario s = load_scenario(file);
        std::cout << "ok: " << (s.name.empty() ? file : s.name) << " (" << s.config.model_id
                  << ", epsilon " << s.config.epsilon << ", t_end " << s.config.t_end << ")\n";
        return exit_ok;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    }
}

void catalog_command()
{
    std::cout << "models:\n";
    for (const std::string& id : catalog_ids()) {
        const ModelPtr m = make_model(id);
        std::cout << "  " << id << "  N=" << m->dim() << "\n";
    }
    std::cout << "profiles:\n";
    for (const std::string& id : profile_ids())
        std::cout << "  " << id << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Front-tracking solver for 1-D conservation laws"};
    app.require_subcommand(1);

    std::string run_file;
    std::string out_dir = "out";
    auto* run = app.add_subcommand("run", "Run a scenario and write its artifacts");
    run->add_option("file", run_file, "Scenario file")->required();
    run->add_option("--out", out_dir, "Output directory");

    std::string check_file;
    auto* check = app.add_subcommand("check", "Parse and validate a scenario");
    check->add_option("file", check_file, "Scenario file")->required();

    auto* catalog = app.add_subcommand("catalog", "List models and initial profiles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }
    if (*run)
        return run_command(run_file, out_dir);
    if (*check)
        return check_command(check_file);
    if (*catalog)
        catalog_command();
    return exit_ok;
}
