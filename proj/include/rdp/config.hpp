#pragma once
// Experiment configuration and the command implementations behind the CLI.
// Configs are JSON files validated against a per-stage key schema; every
// run writes the resolved config next to its outputs so re-runs are
// reproducible from the artifact alone.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdp/daa.hpp"
#include "rdp/daa_risk.hpp"

namespace rdp {
namespace cli {

// Exit codes: 0 success, 2 config error, 3 missing prerequisite,
// 4 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitPrerequisite = 3;
inline constexpr int kExitRuntime = 4;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PrerequisiteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PerceiverSpec {
    std::string kind;  // perfect | never-detect | detection-model | detector
    std::string checkpoint;
    std::string name;
};

struct ExperimentConfig {
    std::string problem;  // pendulum | daa
    std::string stage;    // solve-risk | train | evaluate | encounters | export-field
    std::vector<double> alphas = {0.0};
    double lambda = 1.0;
    std::string data = "uniform";  // uniform | risk_weighted
    std::string loss = "baseline";  // baseline | risk
    std::size_t n = 10000;
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string out_dir;

    // Prerequisite artifacts.
    std::string risk_table;
    std::string policy;
    std::string checkpoint;

    // Pendulum rendering.
    int resolution = 32;
    double noise_sigma = 0.1;

    // Evaluation sizes.
    int n_trajectories = 100;
    int eval_horizon = 500;
    int trials = 5;
    std::size_t n_encounters = 1000;
    std::size_t validation_images = 1000;
    std::size_t occupancy_encounters = 1000;
    std::vector<PerceiverSpec> perceivers;

    // DAA model knobs.
    daa::ControllerCostConfig controller_costs;
    daa::DetectionModel detection_model;

    // export-field.
    std::string field = "weight";  // weight | policy | risk
};

// Parses and validates; `stage` comes from the subcommand. Unknown keys
// and out-of-range values raise ConfigError.
ExperimentConfig parse_config_file(const std::string& path, const std::string& stage);
ExperimentConfig parse_config_text(const std::string& json_text, const std::string& stage);

// Serialized resolved config (stable key order).
std::string resolved_config_json(const ExperimentConfig& config);

// Command bodies; return kExitOk or throw. The CLI maps exception types
// to exit codes.
int run_solve_risk(const ExperimentConfig& config);
int run_train(const ExperimentConfig& config);
int run_evaluate(const ExperimentConfig& config);
int run_encounters(const ExperimentConfig& config);
int run_export_field(const ExperimentConfig& config);

}  // namespace cli
}  // namespace rdp
