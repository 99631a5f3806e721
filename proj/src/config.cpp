#include "rdp/config.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <json.hpp>

#include "rdp/daa_vision.hpp"
#include "rdp/encounters.hpp"
#include "rdp/pendulum.hpp"
#include "rdp/pendulum_pipeline.hpp"
#include "rdp/sampling.hpp"
#include "rdp/solver.hpp"

namespace rdp {
namespace cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kCommonKeys = {"problem", "stage", "seed", "out_dir", "jobs"};

const std::set<std::string> kStageKeys[] = {
    // solve-risk
    {"controller_costs", "detection_model", "occupancy_encounters"},
    // train
    {"alpha", "lambda", "data", "loss", "n", "epochs", "batch_size", "learning_rate",
     "risk_table", "resolution", "noise_sigma"},
    // evaluate
    {"checkpoint", "risk_table", "policy", "alpha", "n_trajectories", "horizon", "trials",
     "resolution", "noise_sigma", "n_encounters", "validation_images", "perceivers"},
    // encounters
    {"policy", "risk_table", "n_encounters"},
    // export-field
    {"field", "alpha", "risk_table", "policy"},
};

int stage_index(const std::string& stage) {
    if (stage == "solve-risk") return 0;
    if (stage == "train") return 1;
    if (stage == "evaluate") return 2;
    if (stage == "encounters") return 3;
    if (stage == "export-field") return 4;
    return -1;
}

double require_number(const json& j, const std::string& key) {
    if (!j.at(key).is_number()) throw ConfigError("config: '" + key + "' must be a number");
    return j.at(key).get<double>();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("config: unknown key '" + key + "' in " + where);
        }
    }
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

struct CsvWriter {
    std::string buffer;
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) buffer += ',';
            buffer += cells[i];
        }
        buffer += '\n';
    }
    void save(const fs::path& path) const { write_text(path, buffer); }
};

fs::path prepare_out_dir(const ExperimentConfig& config) {
    fs::path dir;
    if (!config.out_dir.empty()) {
        dir = config.out_dir;
    } else {
        const char* root = std::getenv("RDP_OUTPUT_ROOT");
        dir = fs::path(root ? root : "runs") / (config.problem + "-" + config.stage);
    }
    fs::create_directories(dir);
    write_text(dir / "resolved_config.json", resolved_config_json(config));
    return dir;
}

void require_file(const std::string& path, const std::string& what,
                  const std::string& producer) {
    if (path.empty() || !fs::exists(path)) {
        throw PrerequisiteError("missing " + what + (path.empty() ? "" : " at " + path) +
                                "; produce it with `rdp " + producer + "` first");
    }
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& json_text, const std::string& stage) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    const int stage_idx = stage_index(stage);
    if (stage_idx < 0) throw ConfigError("unknown stage '" + stage + "'");

    std::set<std::string> allowed = kCommonKeys;
    allowed.insert(kStageKeys[stage_idx].begin(), kStageKeys[stage_idx].end());
    check_keys(j, allowed, "top level");

    ExperimentConfig config;
    config.stage = stage;
    if (!j.contains("problem")) throw ConfigError("config: 'problem' is required");
    config.problem = j.at("problem").get<std::string>();
    if (config.problem != "pendulum" && config.problem != "daa") {
        throw ConfigError("config: problem must be 'pendulum' or 'daa'");
    }
    if (j.contains("stage")) {
        const auto file_stage = j.at("stage").get<std::string>();
        if (file_stage != stage) {
            throw ConfigError("config: stage '" + file_stage + "' does not match subcommand '" +
                              stage + "'");
        }
    }
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out_dir")) config.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("jobs")) {
        config.jobs = j.at("jobs").get<int>();
        if (config.jobs < 1) throw ConfigError("config: jobs must be >= 1");
    }

    if (j.contains("alpha")) {
        config.alphas.clear();
        if (j.at("alpha").is_array()) {
            for (const auto& a : j.at("alpha")) config.alphas.push_back(a.get<double>());
        } else {
            config.alphas.push_back(require_number(j, "alpha"));
        }
        if (config.alphas.empty()) throw ConfigError("config: alpha list is empty");
        for (double a : config.alphas) {
            if (!(a >= 0.0) || !(a < 1.0)) {
                throw ConfigError("config: alpha must lie in [0, 1), got " + format_double(a));
            }
        }
    }
    if (j.contains("lambda")) {
        config.lambda = require_number(j, "lambda");
        if (config.lambda < 0.0) throw ConfigError("config: lambda must be >= 0");
    }
    if (j.contains("data")) {
        config.data = j.at("data").get<std::string>();
        if (config.data != "uniform" && config.data != "risk_weighted") {
            throw ConfigError("config: data must be 'uniform' or 'risk_weighted'");
        }
    }
    if (j.contains("loss")) {
        config.loss = j.at("loss").get<std::string>();
        if (config.loss != "baseline" && config.loss != "risk") {
            throw ConfigError("config: loss must be 'baseline' or 'risk'");
        }
    }
    if (j.contains("n")) {
        const auto n = j.at("n").get<long long>();
        if (n < 1) throw ConfigError("config: n must be >= 1");
        config.n = static_cast<std::size_t>(n);
    }
    if (j.contains("epochs")) {
        config.epochs = j.at("epochs").get<int>();
        if (config.epochs < 1) throw ConfigError("config: epochs must be >= 1");
    }
    if (j.contains("batch_size")) {
        config.batch_size = j.at("batch_size").get<int>();
        if (config.batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    }
    if (j.contains("learning_rate")) {
        config.learning_rate = require_number(j, "learning_rate");
        if (!(config.learning_rate > 0.0)) throw ConfigError("config: learning_rate must be > 0");
    }
    if (j.contains("risk_table")) config.risk_table = j.at("risk_table").get<std::string>();
    if (j.contains("policy")) config.policy = j.at("policy").get<std::string>();
    if (j.contains("checkpoint")) config.checkpoint = j.at("checkpoint").get<std::string>();
    if (j.contains("resolution")) {
        config.resolution = j.at("resolution").get<int>();
        if (config.resolution < 8) throw ConfigError("config: resolution must be >= 8");
    }
    if (j.contains("noise_sigma")) {
        config.noise_sigma = require_number(j, "noise_sigma");
        if (config.noise_sigma < 0.0) throw ConfigError("config: noise_sigma must be >= 0");
    }
    if (j.contains("n_trajectories")) config.n_trajectories = j.at("n_trajectories").get<int>();
    if (j.contains("horizon")) config.eval_horizon = j.at("horizon").get<int>();
    if (j.contains("trials")) {
        config.trials = j.at("trials").get<int>();
        if (config.trials < 1) throw ConfigError("config: trials must be >= 1");
    }
    if (j.contains("n_encounters")) {
        config.n_encounters = j.at("n_encounters").get<std::size_t>();
    }
    if (j.contains("validation_images")) {
        config.validation_images = j.at("validation_images").get<std::size_t>();
    }
    if (j.contains("occupancy_encounters")) {
        config.occupancy_encounters = j.at("occupancy_encounters").get<std::size_t>();
    }
    if (j.contains("perceivers")) {
        for (const auto& p : j.at("perceivers")) {
            check_keys(p, {"kind", "checkpoint", "name"}, "perceivers entry");
            PerceiverSpec spec;
            spec.kind = p.at("kind").get<std::string>();
            if (spec.kind != "perfect" && spec.kind != "never-detect" &&
                spec.kind != "detection-model" && spec.kind != "detector") {
                throw ConfigError("config: unknown perceiver kind '" + spec.kind + "'");
            }
            if (p.contains("checkpoint")) spec.checkpoint = p.at("checkpoint").get<std::string>();
            if (p.contains("name")) spec.name = p.at("name").get<std::string>();
            if (spec.name.empty()) spec.name = spec.kind;
            config.perceivers.push_back(std::move(spec));
        }
    }
    if (j.contains("controller_costs")) {
        const auto& c = j.at("controller_costs");
        check_keys(c, {"nmac_cost", "nmac_threshold", "alert_cost", "reversal_cost",
                       "alert_margin", "drift_inhibit_buffer"},
                   "controller_costs");
        if (c.contains("alert_margin")) {
            config.controller_costs.alert_margin = c.at("alert_margin").get<double>();
        }
        if (c.contains("drift_inhibit_buffer")) {
            config.controller_costs.drift_inhibit_buffer =
                c.at("drift_inhibit_buffer").get<double>();
        }
        if (c.contains("nmac_cost")) config.controller_costs.nmac_cost = c.at("nmac_cost").get<double>();
        if (c.contains("nmac_threshold")) {
            config.controller_costs.nmac_threshold = c.at("nmac_threshold").get<double>();
        }
        if (c.contains("alert_cost")) config.controller_costs.alert_cost = c.at("alert_cost").get<double>();
        if (c.contains("reversal_cost")) {
            config.controller_costs.reversal_cost = c.at("reversal_cost").get<double>();
        }
    }
    if (j.contains("detection_model")) {
        const auto& m = j.at("detection_model");
        check_keys(m,
                   {"fov_slope", "fov_tau_offset", "closure_speed", "inv_range_gain",
                    "inv_range_bias", "max_prob"},
                   "detection_model");
        if (m.contains("fov_slope")) config.detection_model.fov_slope = m.at("fov_slope").get<double>();
        if (m.contains("fov_tau_offset")) {
            config.detection_model.fov_tau_offset = m.at("fov_tau_offset").get<double>();
        }
        if (m.contains("closure_speed")) {
            config.detection_model.closure_speed = m.at("closure_speed").get<double>();
        }
        if (m.contains("inv_range_gain")) {
            config.detection_model.inv_range_gain = m.at("inv_range_gain").get<double>();
        }
        if (m.contains("inv_range_bias")) {
            config.detection_model.inv_range_bias = m.at("inv_range_bias").get<double>();
        }
        if (m.contains("max_prob")) config.detection_model.max_prob = m.at("max_prob").get<double>();
    }
    if (j.contains("field")) {
        config.field = j.at("field").get<std::string>();
        if (config.field != "weight" && config.field != "policy" && config.field != "risk") {
            throw ConfigError("config: field must be 'weight', 'policy', or 'risk'");
        }
    }
    return config;
}

ExperimentConfig parse_config_file(const std::string& path, const std::string& stage) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text, stage);
}

std::string resolved_config_json(const ExperimentConfig& config) {
    json j;
    j["problem"] = config.problem;
    j["stage"] = config.stage;
    j["seed"] = config.seed;
    j["jobs"] = config.jobs;
    j["alpha"] = config.alphas;
    j["lambda"] = config.lambda;
    j["data"] = config.data;
    j["loss"] = config.loss;
    j["n"] = config.n;
    j["epochs"] = config.epochs;
    j["batch_size"] = config.batch_size;
    j["learning_rate"] = config.learning_rate;
    j["resolution"] = config.resolution;
    j["noise_sigma"] = config.noise_sigma;
    j["n_trajectories"] = config.n_trajectories;
    j["horizon"] = config.eval_horizon;
    j["trials"] = config.trials;
    j["n_encounters"] = config.n_encounters;
    j["validation_images"] = config.validation_images;
    j["occupancy_encounters"] = config.occupancy_encounters;
    if (!config.risk_table.empty()) j["risk_table"] = config.risk_table;
    if (!config.policy.empty()) j["policy"] = config.policy;
    if (!config.checkpoint.empty()) j["checkpoint"] = config.checkpoint;
    if (!config.out_dir.empty()) j["out_dir"] = config.out_dir;
    if (!config.perceivers.empty()) {
        json list = json::array();
        for (const auto& p : config.perceivers) {
            json e;
            e["kind"] = p.kind;
            if (!p.checkpoint.empty()) e["checkpoint"] = p.checkpoint;
            e["name"] = p.name;
            list.push_back(e);
        }
        j["perceivers"] = list;
    }
    j["controller_costs"] = {{"nmac_cost", config.controller_costs.nmac_cost},
                             {"nmac_threshold", config.controller_costs.nmac_threshold},
                             {"alert_cost", config.controller_costs.alert_cost},
                             {"reversal_cost", config.controller_costs.reversal_cost},
                             {"alert_margin", config.controller_costs.alert_margin},
                             {"drift_inhibit_buffer",
                              config.controller_costs.drift_inhibit_buffer}};
    j["detection_model"] = {{"fov_slope", config.detection_model.fov_slope},
                            {"fov_tau_offset", config.detection_model.fov_tau_offset},
                            {"closure_speed", config.detection_model.closure_speed},
                            {"inv_range_gain", config.detection_model.inv_range_gain},
                            {"inv_range_bias", config.detection_model.inv_range_bias},
                            {"max_prob", config.detection_model.max_prob}};
    j["field"] = config.field;
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

int run_solve_risk(const ExperimentConfig& config) {
    const fs::path out = prepare_out_dir(config);
    if (config.problem == "pendulum") {
        auto problem = pendulum::build_pendulum_mdp();
        SolveOptions options;
        options.keep = SolveOptions::Keep::top_slice;
        options.jobs = config.jobs;
        SolveReport report;
        const auto table = solve(problem.mdp, problem.cost_support, options, &report);
        save_table(table, (out / "pendulum_risk_table.bin").string());
        std::cout << "solved pendulum risk table in " << format_double(report.wall_seconds)
                  << " s; clamped samples: " << report.clamped_samples
                  << " (mass " << format_double(report.clamped_mass) << ")\n";
        std::cout << "wrote " << (out / "pendulum_risk_table.bin").string() << "\n";
        return kExitOk;
    }

    // DAA: controller policy, full risk table, occupancy, marginal table.
    const daa::GridConfig grid_config;
    const auto t0 = std::chrono::steady_clock::now();
    const auto policy = daa::solve_controller(grid_config, config.controller_costs);
    const double policy_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    daa::save_policy(policy, (out / "daa_policy.bin").string());

    auto problem = daa::build_daa_risk_mdp(policy, config.detection_model, grid_config);
    SolveOptions options;
    options.keep = SolveOptions::Keep::all_slices;
    options.jobs = config.jobs;
    SolveReport report;
    const auto full = solve(problem.mdp, problem.cost_support, options, &report);
    save_table(full, (out / "daa_risk_full.bin").string());

    const auto occupancy =
        enc::occupancy_weights(policy, grid_config, config.occupancy_encounters, config.seed);
    const auto marginal = daa::marginalize_table(full, occupancy);
    save_table(marginal, (out / "daa_risk_marginal.bin").string());

    CsvWriter occ_csv;
    occ_csv.row({"hdot_index", "a_prev", "weight"});
    for (std::size_t di = 0; di < occupancy.hdot_points; ++di) {
        for (std::size_t ap = 0; ap < 3; ++ap) {
            occ_csv.row({std::to_string(di), std::to_string(ap),
                         format_double(occupancy.at(di, ap))});
        }
    }
    occ_csv.save(out / "occupancy.csv");

    std::cout << "solved controller policy in " << format_double(policy_seconds) << " s\n";
    std::cout << "solved DAA risk table in " << format_double(report.wall_seconds)
              << " s; clamped samples: " << report.clamped_samples << "\n";
    std::cout << "wrote " << (out / "daa_risk_marginal.bin").string() << "\n";
    return kExitOk;
}

int run_train(const ExperimentConfig& config) {
    const fs::path out = prepare_out_dir(config);
    const double alpha = config.alphas.front();

    if (config.problem == "pendulum") {
        const bool needs_table = config.loss == "risk" || config.data == "risk_weighted";
        std::optional<RiskTable> table;
        if (needs_table) {
            require_file(config.risk_table, "risk table", "solve-risk");
            table = load_table(config.risk_table);
        }
        const RiskTable* table_ptr = table ? &*table : nullptr;

        pendulum::DatasetConfig data_config;
        data_config.kind = config.data == "risk_weighted" ? pendulum::DatasetKind::risk_weighted
                                                          : pendulum::DatasetKind::uniform;
        data_config.n = config.n;
        data_config.alpha = alpha;
        data_config.render.resolution = config.resolution;
        data_config.render.noise_sigma = config.noise_sigma;
        const auto dataset = pendulum::generate_dataset(data_config, table_ptr, config.seed);

        const int obs_dim = 2 * config.resolution * config.resolution;
        nn::DenseNet net({obs_dim, 64, 64, 2}, nn::OutputSpec{2, 0}, config.seed ^ 0x9e77u);
        nn::TrainConfig train_config;
        train_config.epochs = config.epochs;
        train_config.batch_size = config.batch_size;
        train_config.learning_rate = config.learning_rate;
        train_config.seed = config.seed;

        nn::LossFn loss;
        const pendulum::LabelScaling scaling;
        if (config.loss == "risk") {
            pendulum::RiskLossConfig risk_config;
            risk_config.lambda = config.lambda;
            risk_config.alpha = alpha;
            loss = pendulum::make_risk_loss(dataset, scaling, *table, risk_config);
        } else {
            loss = pendulum::make_baseline_loss(dataset, scaling);
        }
        const auto result = nn::train(net, dataset, train_config, loss);
        nn::save_net(net, (out / "checkpoint.bin").string());

        CsvWriter trace;
        trace.row({"epoch", "loss"});
        for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
            trace.row({std::to_string(e), format_double(result.epoch_loss[e])});
        }
        trace.save(out / "loss_trace.csv");
        std::cout << "trained pendulum net (" << config.loss << " loss, " << config.data
                  << " data, n=" << config.n << "); final loss "
                  << format_double(result.epoch_loss.back()) << "\n";
        std::cout << "wrote " << (out / "checkpoint.bin").string() << "\n";
        return kExitOk;
    }

    // DAA detector.
    require_file(config.risk_table, "marginal risk table", "solve-risk");
    const auto marginal = load_table(config.risk_table);

    daa::DetectorDatasetConfig data_config;
    data_config.kind = config.data == "risk_weighted" ? daa::DetectorDataKind::risk_weighted
                                                      : daa::DetectorDataKind::uniform;
    data_config.n = config.n;
    data_config.alpha = alpha;
    data_config.render.resolution = config.resolution;
    const auto dataset = daa::generate_detector_dataset(data_config, marginal, config.seed);

    daa::DetectorConfig detector_config;
    detector_config.train.epochs = config.epochs;
    detector_config.train.batch_size = config.batch_size;
    detector_config.train.learning_rate = config.learning_rate;
    detector_config.train.seed = config.seed;
    detector_config.lambda = config.lambda;
    detector_config.alpha = alpha;
    const auto loss_kind =
        config.loss == "risk" ? daa::DetectorLoss::risk : daa::DetectorLoss::baseline;
    const auto net = daa::train_detector(dataset, loss_kind, marginal, detector_config);
    nn::save_net(net, (out / "detector.bin").string());
    std::cout << "trained DAA detector (" << config.loss << " loss, " << config.data
              << " data, n=" << config.n << ")\n";
    std::cout << "wrote " << (out / "detector.bin").string() << "\n";
    return kExitOk;
}

int run_evaluate(const ExperimentConfig& config) {
    const fs::path out = prepare_out_dir(config);

    if (config.problem == "pendulum") {
        require_file(config.checkpoint, "checkpoint", "train");
        const auto net = nn::load_net(config.checkpoint);
        pendulum::MttfConfig mttf_config;
        mttf_config.n_trajectories = config.n_trajectories;
        mttf_config.horizon = config.eval_horizon;
        mttf_config.n_trials = config.trials;
        mttf_config.render.resolution = config.resolution;
        mttf_config.render.noise_sigma = config.noise_sigma;
        mttf_config.jobs = config.jobs;
        const pendulum::LabelScaling scaling;
        const auto result =
            pendulum::evaluate_mttf(pendulum::net_perceiver(net, scaling), mttf_config, config.seed);

        CsvWriter csv;
        csv.row({"trial", "mttf"});
        for (std::size_t t = 0; t < result.trial_means.size(); ++t) {
            csv.row({std::to_string(t), format_double(result.trial_means[t])});
        }
        csv.row({"mean", format_double(result.mean)});
        csv.row({"std_error", format_double(result.std_error)});
        csv.save(out / "mttf.csv");
        std::cout << "MTTF " << format_double(result.mean) << " +- "
                  << format_double(result.std_error) << " over " << config.trials << " trials\n";
        std::cout << "wrote " << (out / "mttf.csv").string() << "\n";
        return kExitOk;
    }

    // DAA encounter evaluation.
    require_file(config.policy, "controller policy", "solve-risk");
    require_file(config.risk_table, "marginal risk table", "solve-risk");
    if (config.perceivers.empty()) {
        throw ConfigError("config: evaluate for daa needs a 'perceivers' list");
    }
    const auto policy = daa::load_policy(config.policy);
    const auto marginal = load_table(config.risk_table);

    std::vector<nn::DenseNet> nets;
    nets.reserve(config.perceivers.size());
    std::vector<enc::Perceiver> perceivers;
    for (const auto& spec : config.perceivers) {
        enc::Perceiver p;
        if (spec.kind == "perfect") {
            p.kind = enc::Perceiver::Kind::perfect;
        } else if (spec.kind == "never-detect") {
            p.kind = enc::Perceiver::Kind::never_detect;
        } else if (spec.kind == "detection-model") {
            p.kind = enc::Perceiver::Kind::detection_model;
            p.model = &config.detection_model;
        } else {
            require_file(spec.checkpoint, "detector checkpoint", "train");
            nets.push_back(nn::load_net(spec.checkpoint));
            p.kind = enc::Perceiver::Kind::detector;
            p.net = &nets.back();
            p.render.resolution = config.resolution;
        }
        perceivers.push_back(p);
    }

    enc::SuiteConfig suite;
    suite.n_encounters = config.n_encounters;
    suite.trials = config.trials;
    suite.validation_images = config.validation_images;
    suite.render.resolution = config.resolution;
    suite.jobs = config.jobs;
    const auto reports = enc::evaluate_suite(policy, perceivers, marginal, suite, config.seed);

    CsvWriter nmac_csv;
    nmac_csv.row({"perceiver", "trial", "nmac_count"});
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        const std::string& name = config.perceivers[i].name;
        for (std::size_t t = 0; t < r.nmac_counts.size(); ++t) {
            nmac_csv.row({name, std::to_string(t), std::to_string(r.nmac_counts[t])});
        }
        nmac_csv.row({name, "mean", format_double(r.nmac_mean)});
        nmac_csv.row({name, "std_error", format_double(r.nmac_std_error)});
    }
    nmac_csv.save(out / "nmac.csv");

    CsvWriter cdf_csv;
    cdf_csv.row({"perceiver", "quantile", "risk"});
    for (std::size_t i = 0; i < reports.size(); ++i) {
        auto risks = reports[i].risk_samples;
        std::sort(risks.begin(), risks.end());
        const int n_points = 200;
        for (int q = 0; q <= n_points; ++q) {
            const double frac = static_cast<double>(q) / n_points;
            const std::size_t idx = std::min(
                risks.size() - 1, static_cast<std::size_t>(frac * (risks.size() - 1) + 0.5));
            cdf_csv.row({config.perceivers[i].name, format_double(frac),
                         format_double(risks[idx])});
        }
    }
    cdf_csv.save(out / "risk_cdf.csv");

    CsvWriter pr_csv;
    pr_csv.row({"perceiver", "precision", "recall", "threshold"});
    for (std::size_t i = 0; i < reports.size(); ++i) {
        pr_csv.row({config.perceivers[i].name, format_double(reports[i].pr.precision),
                    format_double(reports[i].pr.recall),
                    format_double(reports[i].threshold)});
    }
    pr_csv.save(out / "precision_recall.csv");

    for (std::size_t i = 0; i < reports.size(); ++i) {
        std::cout << config.perceivers[i].name << ": NMAC "
                  << format_double(reports[i].nmac_mean) << " +- "
                  << format_double(reports[i].nmac_std_error) << ", precision "
                  << format_double(reports[i].pr.precision) << ", recall "
                  << format_double(reports[i].pr.recall) << "\n";
    }
    std::cout << "wrote " << (out / "nmac.csv").string() << "\n";
    return kExitOk;
}

int run_encounters(const ExperimentConfig& config) {
    if (config.problem != "daa") {
        throw ConfigError("config: the encounters stage applies to problem 'daa'");
    }
    const fs::path out = prepare_out_dir(config);
    require_file(config.policy, "controller policy", "solve-risk");
    require_file(config.risk_table, "marginal risk table", "solve-risk");
    const auto policy = daa::load_policy(config.policy);
    const auto marginal = load_table(config.risk_table);

    enc::Perceiver perfect;
    perfect.kind = enc::Perceiver::Kind::perfect;
    enc::Perceiver never;
    never.kind = enc::Perceiver::Kind::never_detect;
    enc::SimConfig sim_config;

    Rng rng(config.seed);
    CsvWriter csv;
    csv.row({"encounter", "own_speed", "intruder_speed", "hmd", "vmd", "rel_heading_deg",
             "nmac_never_detect", "nmac_perfect"});
    std::size_t never_count = 0;
    std::size_t perfect_count = 0;
    for (std::size_t i = 0; i < config.n_encounters; ++i) {
        const std::uint64_t enc_seed = rng.next_u64();
        const std::uint64_t sim_seed = rng.next_u64();
        const auto encounter = enc::sample_encounter(enc_seed);
        const auto sim_never =
            enc::simulate(encounter, policy, never, &marginal, sim_config, sim_seed);
        const auto sim_perfect =
            enc::simulate(encounter, policy, perfect, &marginal, sim_config, sim_seed);
        never_count += sim_never.nmac;
        perfect_count += sim_perfect.nmac;
        csv.row({std::to_string(i), format_double(encounter.features.own_speed),
                 format_double(encounter.features.intruder_speed),
                 format_double(encounter.features.hmd), format_double(encounter.features.vmd),
                 format_double(encounter.features.rel_heading_deg),
                 std::to_string(static_cast<int>(sim_never.nmac)),
                 std::to_string(static_cast<int>(sim_perfect.nmac))});
    }
    csv.save(out / "encounters.csv");

    // Per-step trace of the first encounter under perfect perception.
    const auto encounter = enc::sample_encounter(Rng(config.seed).next_u64());
    const auto trace =
        enc::simulate(encounter, policy, perfect, &marginal, sim_config, config.seed ^ 0x77);
    CsvWriter trace_csv;
    trace_csv.row({"t", "tau", "h", "own_alt", "intruder_alt", "horizontal_sep", "detected",
                   "advisory", "risk"});
    for (std::size_t t = 0; t < trace.states.size(); ++t) {
        trace_csv.row({std::to_string(t), std::to_string(trace.states[t].tau),
                       format_double(trace.states[t].h), format_double(trace.own_alt[t]),
                       format_double(trace.intruder_alt[t]),
                       format_double(encounter.horizontal_separation(static_cast<int>(t))),
                       std::to_string(static_cast<int>(trace.detected[t])),
                       std::to_string(static_cast<int>(trace.advisories[t])),
                       format_double(trace.risk[t])});
    }
    trace_csv.save(out / "trace_0.csv");

    std::cout << "encounters: " << never_count << "/" << config.n_encounters
              << " NMAC under never-detect, " << perfect_count << "/" << config.n_encounters
              << " under perfect perception\n";
    std::cout << "wrote " << (out / "encounters.csv").string() << "\n";
    return kExitOk;
}

int run_export_field(const ExperimentConfig& config) {
    const fs::path out = prepare_out_dir(config);
    const double alpha = config.alphas.front();

    if (config.field == "policy") {
        if (config.problem != "daa") throw ConfigError("config: policy export is daa-only");
        require_file(config.policy, "controller policy", "solve-risk");
        const auto policy = daa::load_policy(config.policy);
        const auto& h_axis = policy.h_axis();
        const int hdot_zero = static_cast<int>(policy.hdot_axis().size() / 2);
        CsvWriter csv;
        csv.row({"tau", "h", "advisory"});
        for (int tau = 0; tau <= policy.grid_config().tau_max; ++tau) {
            for (std::size_t hi = 0; hi < h_axis.size(); ++hi) {
                csv.row({std::to_string(tau), format_double(h_axis[hi]),
                         std::to_string(static_cast<int>(policy.at(
                             static_cast<int>(hi), hdot_zero, daa::Advisory::coc, tau)))});
            }
        }
        csv.save(out / "policy_slice.csv");
        std::cout << "wrote " << (out / "policy_slice.csv").string() << "\n";
        return kExitOk;
    }

    require_file(config.risk_table, "risk table", "solve-risk");
    const auto table = load_table(config.risk_table);

    if (config.field == "weight") {
        const Grid& grid = table.state_grid();
        if (grid.num_axes() != 2 || grid.num_discrete() != 0) {
            throw ConfigError("config: weight export needs a 2-axis table");
        }
        CsvWriter csv;
        csv.row(config.problem == "pendulum"
                    ? std::vector<std::string>{"theta", "omega", "weight"}
                    : std::vector<std::string>{"h", "tau", "weight"});
        std::vector<double> x(2);
        std::vector<int> none;
        for (std::size_t cell = 0; cell < grid.num_cells(); ++cell) {
            grid.cell_point(cell, x, none);
            csv.row({format_double(x[0]), format_double(x[1]),
                     format_double(table.risk_weight(x, RiskLevel(alpha)))});
        }
        csv.save(out / "weight_field.csv");
        std::cout << "wrote " << (out / "weight_field.csv").string() << "\n";
        return kExitOk;
    }

    // Risk export.
    CsvWriter csv;
    if (config.problem == "pendulum") {
        // Risk over the error atoms at a reference state.
        const double state[2] = {0.2, 0.0};
        csv.row({"eps_theta", "eps_omega", "risk"});
        const Grid& eg = table.error_grid();
        std::vector<double> eps(2);
        std::vector<int> none;
        for (std::size_t e = 0; e < eg.num_cells(); ++e) {
            eg.cell_point(e, eps, none);
            csv.row({format_double(eps[0]), format_double(eps[1]),
                     format_double(table.risk(std::span<const double>(state, 2), e,
                                              RiskLevel(alpha)))});
        }
        csv.save(out / "risk_slice.csv");
    } else {
        const Grid& grid = table.state_grid();
        if (grid.num_axes() != 2) throw ConfigError("config: risk export needs the marginal table");
        csv.row({"h", "tau", "risk_detected", "risk_missed"});
        std::vector<double> x(2);
        std::vector<int> none;
        for (std::size_t cell = 0; cell < grid.num_cells(); ++cell) {
            grid.cell_point(cell, x, none);
            csv.row({format_double(x[0]), format_double(x[1]),
                     format_double(table.risk_at(cell, 0, RiskLevel(alpha))),
                     format_double(table.risk_at(cell, 1, RiskLevel(alpha)))});
        }
        csv.save(out / "risk_slice.csv");
    }
    std::cout << "wrote " << (out / "risk_slice.csv").string() << "\n";
    return kExitOk;
}

}  // namespace cli
}  // namespace rdp
