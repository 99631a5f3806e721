#include "rdp/pendulum_pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "rdp/rng.hpp"
#include "rdp/sampling.hpp"

namespace rdp {
namespace pendulum {

nn::LossFn make_baseline_loss(const nn::LabeledDataset& data, const LabelScaling& scaling) {
    const double st = scaling.theta_scale;
    const double sw = scaling.omega_scale;
    return [&data, st, sw](std::span<const double> output, std::size_t idx,
                           std::span<double> grad) {
        const auto label = data.label_row(idx);
        const double et = st * (output[0] - label[0]);
        const double ew = sw * (output[1] - label[1]);
        grad[0] = st * et;  // d/dy of (et^2 + ew^2)/2
        grad[1] = sw * ew;
        return 0.5 * (et * et + ew * ew);
    };
}

double risk_term(const RiskTable& table, std::span<const double> state,
                 std::span<const double> estimate, double alpha) {
    const double span = table.cost_support().back() - table.cost_support().front();
    const double eps[2] = {estimate[0] - state[0], estimate[1] - state[1]};
    const double zero[2] = {0.0, 0.0};
    const double rho = table.risk(state, std::span<const double>(eps, 2), RiskLevel(alpha));
    const double rho0 = table.risk(state, std::span<const double>(zero, 2), RiskLevel(alpha));
    return (rho - rho0) / span;
}

nn::LossFn make_risk_loss(const nn::LabeledDataset& data, const LabelScaling& scaling,
                          const RiskTable& table, const RiskLossConfig& config) {
    auto baseline = make_baseline_loss(data, scaling);
    const double st = scaling.theta_scale;
    const double sw = scaling.omega_scale;
    const double lambda = config.lambda;
    const double alpha = config.alpha;
    const double span = table.cost_support().back() - table.cost_support().front();
    return [&data, &table, baseline, st, sw, lambda, alpha, span](
               std::span<const double> output, std::size_t idx, std::span<double> grad) {
        const double base = baseline(output, idx, grad);
        if (lambda == 0.0) return base;
        const auto state = data.state_row(idx);
        const double estimate[2] = {st * output[0], sw * output[1]};
        const double term =
            risk_term(table, state, std::span<const double>(estimate, 2), alpha);
        const double eps[2] = {estimate[0] - state[0], estimate[1] - state[1]};
        const auto rho_grad =
            table.risk_gradient(state, std::span<const double>(eps, 2), RiskLevel(alpha));
        grad[0] += lambda / span * rho_grad[0] * st;
        grad[1] += lambda / span * rho_grad[1] * sw;
        return base + lambda * term;
    };
}

nn::LabeledDataset generate_dataset(const DatasetConfig& config, const RiskTable* table,
                                    std::uint64_t seed) {
    if (config.n < 1) throw std::invalid_argument("generate_dataset: n must be >= 1");

    std::vector<std::vector<double>> states;
    states.reserve(config.n);
    Rng rng(seed);
    if (config.kind == DatasetKind::risk_weighted) {
        if (table == nullptr) {
            throw std::invalid_argument("generate_dataset: risk-weighted sampling needs a table");
        }
        states = rejection_sample_states(*table, RiskLevel(config.alpha), config.n, seed);
    } else {
        for (std::size_t i = 0; i < config.n; ++i) {
            states.push_back({rng.uniform(-config.theta_range, config.theta_range),
                              rng.uniform(-config.omega_range, config.omega_range)});
        }
    }

    const int res = config.render.resolution;
    const int obs_dim = 2 * res * res;
    nn::LabeledDataset data;
    data.obs_dim = obs_dim;
    data.label_dim = 2;
    data.state_dim = 2;
    data.provenance = config.kind == DatasetKind::risk_weighted
                          ? nn::LabeledDataset::Provenance::risk_weighted
                          : nn::LabeledDataset::Provenance::uniform;
    data.obs.reserve(config.n * static_cast<std::size_t>(obs_dim));
    data.labels.reserve(config.n * 2);
    data.states.reserve(config.n * 2);

    Rng render_seeds = rng.split(0x0b5e0000u);
    const PendulumParams params;
    for (std::size_t i = 0; i < config.n; ++i) {
        const PendulumState s{states[i][0], states[i][1]};
        const PendulumState prev{s.theta - s.omega * params.dt, s.omega};
        const auto frames = render(s, prev, config.render, render_seeds.next_u64());
        data.obs.insert(data.obs.end(), frames.previous.begin(), frames.previous.end());
        data.obs.insert(data.obs.end(), frames.current.begin(), frames.current.end());
        data.labels.push_back(
            std::clamp(s.theta / config.scaling.theta_scale, -1.0, 1.0));
        data.labels.push_back(
            std::clamp(s.omega / config.scaling.omega_scale, -1.0, 1.0));
        data.states.push_back(s.theta);
        data.states.push_back(s.omega);
    }
    return data;
}

Perceiver net_perceiver(const nn::DenseNet& net, const LabelScaling& scaling) {
    return [&net, scaling](const ObservationFrames& obs, const PendulumState&,
                           PendulumState& estimate) {
        std::vector<double> input;
        input.reserve(obs.previous.size() + obs.current.size());
        input.insert(input.end(), obs.previous.begin(), obs.previous.end());
        input.insert(input.end(), obs.current.begin(), obs.current.end());
        const auto out = net.forward(input);
        estimate.theta = scaling.theta_scale * out[0];
        estimate.omega = scaling.omega_scale * out[1];
    };
}

Perceiver oracle_perceiver() {
    return [](const ObservationFrames&, const PendulumState& truth, PendulumState& estimate) {
        estimate = truth;
    };
}

Perceiver constant_perceiver(PendulumState value) {
    return [value](const ObservationFrames&, const PendulumState&, PendulumState& estimate) {
        estimate = value;
    };
}

namespace {

int run_trajectory(const Perceiver& perceiver, const MttfConfig& config, Rng rng) {
    const PendulumParams params;
    PendulumState s{rng.uniform(-config.init_theta_range, config.init_theta_range),
                    rng.uniform(-config.init_omega_range, config.init_omega_range)};
    PendulumState prev = s;
    PendulumState estimate;
    for (int step_idx = 1; step_idx <= config.horizon; ++step_idx) {
        const auto obs = render(s, prev, config.render, rng.next_u64());
        perceiver(obs, s, estimate);
        const double torque = control(estimate, params);
        const PendulumState next = step(s, torque, params);
        prev = s;
        s = next;
        if (failed(s)) return step_idx;
    }
    return config.horizon;
}

}  // namespace

MttfResult evaluate_mttf(const Perceiver& perceiver, const MttfConfig& config,
                         std::uint64_t seed) {
    MttfResult result;
    Rng root(seed);
    for (int trial = 0; trial < config.n_trials; ++trial) {
        const Rng trial_rng = root.split(static_cast<std::uint64_t>(trial));
        std::vector<int> ttf(static_cast<std::size_t>(config.n_trajectories), 0);
        const int jobs = std::max(1, config.jobs);
        if (jobs == 1) {
            for (int i = 0; i < config.n_trajectories; ++i) {
                ttf[static_cast<std::size_t>(i)] =
                    run_trajectory(perceiver, config, trial_rng.split(static_cast<std::uint64_t>(i)));
            }
        } else {
            std::vector<std::thread> threads;
            std::atomic<int> cursor{0};
            for (int w = 0; w < jobs; ++w) {
                threads.emplace_back([&] {
                    int i;
                    while ((i = cursor.fetch_add(1)) < config.n_trajectories) {
                        ttf[static_cast<std::size_t>(i)] = run_trajectory(
                            perceiver, config, trial_rng.split(static_cast<std::uint64_t>(i)));
                    }
                });
            }
            for (auto& t : threads) t.join();
        }
        double mean = 0.0;
        for (int v : ttf) mean += v;
        result.trial_means.push_back(mean / config.n_trajectories);
    }
    double mean = 0.0;
    for (double v : result.trial_means) mean += v;
    mean /= static_cast<double>(result.trial_means.size());
    double var = 0.0;
    for (double v : result.trial_means) var += (v - mean) * (v - mean);
    const std::size_t n = result.trial_means.size();
    result.mean = mean;
    result.std_error = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) /
                                   std::sqrt(static_cast<double>(n))
                             : 0.0;
    return result;
}

}  // namespace pendulum
}  // namespace rdp
