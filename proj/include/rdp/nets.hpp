#pragma once
// Small dense networks with explicit forward/backward passes, an Adam
// training loop over pluggable per-sample losses, and a versioned
// checkpoint container. Training is single-threaded and deterministic
// per seed; forward() is const and thread-safe.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rdp {
namespace nn {

// Output units in order: a tanh block, then a logistic block; any
// remaining units are linear.
struct OutputSpec {
    int tanh_units = 0;
    int logistic_units = 0;
};

// Parameters live in one flat buffer laid out [W0, b0, W1, b1, ...] so the
// optimizer and gradient buffers share offsets.
class DenseNet {
public:
    DenseNet() = default;
    // sizes = {input, hidden..., output}; hidden layers use ReLU.
    DenseNet(std::vector<int> sizes, OutputSpec head, std::uint64_t seed);

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    const std::vector<int>& sizes() const { return sizes_; }
    std::size_t num_layers() const { return sizes_.size() - 1; }
    const OutputSpec& head() const { return head_; }
    std::size_t num_params() const { return params_.size(); }

    std::span<const double> weight(std::size_t layer) const;
    std::span<const double> bias(std::size_t layer) const;
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    void forward(std::span<const double> input, std::span<double> output) const;
    std::vector<double> forward(std::span<const double> input) const;

    struct Workspace {
        std::vector<std::vector<double>> pre;   // pre-activation per layer
        std::vector<std::vector<double>> act;   // post-activation; act[0] = input
        std::vector<std::vector<double>> delta;
    };
    void forward_cached(std::span<const double> input, Workspace& ws) const;
    // Backward from dL/d(output post-activation); accumulates into a flat
    // gradient buffer with the same layout as params().
    void backward(const Workspace& ws, std::span<const double> grad_output,
                  std::span<double> grad_params, Workspace& scratch) const;

private:
    std::vector<int> sizes_;
    OutputSpec head_;
    std::vector<double> params_;
    std::vector<std::size_t> w_offset_;
    std::vector<std::size_t> b_offset_;
};

void save_net(const DenseNet& net, const std::string& path);
DenseNet load_net(const std::string& path);

struct TrainConfig {
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;  // Adam step size
    std::uint64_t seed = 0;
};

struct LabeledDataset {
    enum class Provenance { uniform, risk_weighted };
    int obs_dim = 0;
    int label_dim = 0;
    int state_dim = 0;
    std::vector<double> obs;     // row-major [n][obs_dim]
    std::vector<double> labels;  // scaled into [-1, 1]
    std::vector<double> states;  // unscaled true states
    Provenance provenance = Provenance::uniform;

    std::size_t size() const {
        return label_dim ? labels.size() / static_cast<std::size_t>(label_dim) : 0;
    }
    std::span<const double> obs_row(std::size_t i) const {
        return {obs.data() + i * static_cast<std::size_t>(obs_dim),
                static_cast<std::size_t>(obs_dim)};
    }
    std::span<const double> label_row(std::size_t i) const {
        return {labels.data() + i * static_cast<std::size_t>(label_dim),
                static_cast<std::size_t>(label_dim)};
    }
    std::span<const double> state_row(std::size_t i) const {
        return {states.data() + i * static_cast<std::size_t>(state_dim),
                static_cast<std::size_t>(state_dim)};
    }
};

// Per-sample loss: fills grad (dL/d output post-activation) and returns
// the loss value.
using LossFn = std::function<double(std::span<const double> output, std::size_t sample_idx,
                                    std::span<double> grad)>;

struct TrainResult {
    std::vector<double> epoch_loss;  // mean per-sample loss
};

// Minibatch Adam; shuffles per epoch with the config seed. Throws
// std::runtime_error with a diagnostic if the loss goes non-finite.
TrainResult train(DenseNet& net, const LabeledDataset& data, const TrainConfig& config,
                  const LossFn& loss);

}  // namespace nn
}  // namespace rdp
