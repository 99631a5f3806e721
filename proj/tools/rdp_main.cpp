// rdp: risk-driven perception design pipelines.
//
//   rdp solve-risk   --config cfg.json    solve a risk table (and, for daa,
//                                         the controller policy + marginal)
//   rdp train        --config cfg.json    train a perception net / detector
//   rdp evaluate     --config cfg.json    MTTF or encounter-suite metrics
//   rdp encounters   --config cfg.json    encounter Monte Carlo sanity runs
//   rdp export-field --config cfg.json    dump weight/policy/risk CSV grids
//
// Exit codes: 0 ok, 2 config error, 3 missing prerequisite, 4 runtime.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rdp/config.hpp"

namespace {

struct StageArgs {
    std::string config_path;
    std::string out_dir;
    std::string seed;
    std::string jobs;
};

void add_stage(CLI::App& app, const std::string& name, const std::string& description,
               StageArgs& args, bool& selected) {
    CLI::App* cmd = app.add_subcommand(name, description);
    cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
    cmd->add_option("--out", args.out_dir, "override output directory");
    cmd->add_option("--seed", args.seed, "override master seed");
    cmd->add_option("--jobs", args.jobs, "override worker count");
    cmd->callback([&selected] { selected = true; });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"risk-driven perception design toolkit"};
    app.require_subcommand(1);

    const std::string stages[] = {"solve-risk", "train", "evaluate", "encounters",
                                  "export-field"};
    const std::string descriptions[] = {
        "solve risk tables via distributional dynamic programming",
        "train a perception network or DAA detector",
        "closed-loop evaluation (pendulum MTTF or DAA encounter suite)",
        "sample and simulate the encounter set",
        "export weight/policy/risk fields as CSV grids",
    };
    StageArgs args[5];
    bool selected[5] = {};
    for (int i = 0; i < 5; ++i) add_stage(app, stages[i], descriptions[i], args[i], selected[i]);

    CLI11_PARSE(app, argc, argv);

    int stage = 0;
    while (stage < 5 && !selected[stage]) ++stage;

    try {
        auto config = rdp::cli::parse_config_file(args[stage].config_path, stages[stage]);
        if (!args[stage].out_dir.empty()) config.out_dir = args[stage].out_dir;
        if (!args[stage].seed.empty()) config.seed = std::stoull(args[stage].seed);
        if (!args[stage].jobs.empty()) {
            config.jobs = std::stoi(args[stage].jobs);
            if (config.jobs < 1) throw rdp::cli::ConfigError("jobs must be >= 1");
        }
        switch (stage) {
            case 0: return rdp::cli::run_solve_risk(config);
            case 1: return rdp::cli::run_train(config);
            case 2: return rdp::cli::run_evaluate(config);
            case 3: return rdp::cli::run_encounters(config);
            default: return rdp::cli::run_export_field(config);
        }
    } catch (const rdp::cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return rdp::cli::kExitConfig;
    } catch (const rdp::cli::PrerequisiteError& e) {
        std::cerr << "prerequisite error: " << e.what() << "\n";
        return rdp::cli::kExitPrerequisite;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return rdp::cli::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return rdp::cli::kExitRuntime;
    }
}
