#pragma once
// Pendulum perception experiments: label scaling, baseline and
// risk-sensitive losses, dataset generation (uniform or risk-weighted),
// and closed-loop mean-time-to-failure evaluation.

#include <cstdint>
#include <functional>

#include "rdp/nets.hpp"
#include "rdp/pendulum.hpp"
#include "rdp/risk_table.hpp"

namespace rdp {
namespace pendulum {

// Labels are state / scale per dimension; estimates are output * scale.
struct LabelScaling {
    double theta_scale = kQuarterPi;
    double omega_scale = 8.0;
};

// Mean squared error in unscaled state units.
nn::LossFn make_baseline_loss(const nn::LabeledDataset& data, const LabelScaling& scaling);

struct RiskLossConfig {
    double lambda = 1.0;
    double alpha = 0.0;
};

// Baseline loss plus lambda * excess risk of the current error, the risk
// normalized by the cost-support span. The risk term backpropagates only
// through the estimate; the gradient comes from the interpolated risk
// surface and is zero along clamped error directions.
nn::LossFn make_risk_loss(const nn::LabeledDataset& data, const LabelScaling& scaling,
                          const RiskTable& table, const RiskLossConfig& config);

// The risk term alone (normalized excess risk at s_hat - s), exposed so
// the loss decomposition is checkable exactly.
double risk_term(const RiskTable& table, std::span<const double> state,
                 std::span<const double> estimate, double alpha);

enum class DatasetKind { uniform, risk_weighted };

struct DatasetConfig {
    DatasetKind kind = DatasetKind::uniform;
    std::size_t n = 10000;
    double alpha = 0.0;  // risk level for risk-weighted sampling
    // Uniform sampling spans the full pendulum state space; the risk grid
    // covers only the operating region around upright.
    double theta_range = 3.14159265358979323846;
    double omega_range = 8.0;
    RenderConfig render;
    LabelScaling scaling;
};

// States drawn uniformly over the state-space ranges or by rejection
// sampling on w_alpha (which requires the solved table); each rendered to
// two frames with the previous state one inverse Euler step back. Labels
// are scaled then clamped into [-1, 1], so states beyond the operating
// region saturate rather than stretch the head.
nn::LabeledDataset generate_dataset(const DatasetConfig& config, const RiskTable* table,
                                    std::uint64_t seed);

// Perceiver in the closed loop: fills `estimate` from the observation;
// the true state is available so oracle baselines can be expressed.
using Perceiver = std::function<void(const ObservationFrames& obs, const PendulumState& truth,
                                     PendulumState& estimate)>;

Perceiver net_perceiver(const nn::DenseNet& net, const LabelScaling& scaling);
Perceiver oracle_perceiver();
Perceiver constant_perceiver(PendulumState value);

struct MttfConfig {
    int n_trajectories = 100;
    int horizon = 500;
    int n_trials = 5;
    double init_theta_range = 0.3;
    double init_omega_range = 0.5;
    RenderConfig render;
    int jobs = 1;
};

struct MttfResult {
    std::vector<double> trial_means;
    double mean = 0.0;
    double std_error = 0.0;
};

// Mean steps to |theta| > pi/4 (horizon if never), averaged per trial,
// then mean +- standard error over trials. Deterministic per seed.
MttfResult evaluate_mttf(const Perceiver& perceiver, const MttfConfig& config,
                         std::uint64_t seed);

}  // namespace pendulum
}  // namespace rdp
