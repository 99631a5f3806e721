#include "rdp/nets.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "rdp/rng.hpp"

namespace rdp {
namespace nn {

DenseNet::DenseNet(std::vector<int> sizes, OutputSpec head, std::uint64_t seed)
    : sizes_(std::move(sizes)), head_(head) {
    if (sizes_.size() < 2) throw std::invalid_argument("DenseNet: need input and output layers");
    for (int s : sizes_) {
        if (s < 1) throw std::invalid_argument("DenseNet: layer sizes must be positive");
    }
    if (head_.tanh_units < 0 || head_.logistic_units < 0 ||
        head_.tanh_units + head_.logistic_units > sizes_.back()) {
        throw std::invalid_argument("DenseNet: head spec exceeds output layer");
    }
    const std::size_t n_layers = sizes_.size() - 1;
    w_offset_.resize(n_layers);
    b_offset_.resize(n_layers);
    std::size_t offset = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
        w_offset_[l] = offset;
        offset += static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
        b_offset_[l] = offset;
        offset += static_cast<std::size_t>(sizes_[l + 1]);
    }
    params_.assign(offset, 0.0);
    Rng rng(seed);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const double scale = std::sqrt(2.0 / sizes_[l]);  // He init for the ReLU stack
        double* w = params_.data() + w_offset_[l];
        const std::size_t n_w =
            static_cast<std::size_t>(sizes_[l]) * static_cast<std::size_t>(sizes_[l + 1]);
        for (std::size_t i = 0; i < n_w; ++i) w[i] = scale * rng.normal();
    }
}

std::span<const double> DenseNet::weight(std::size_t layer) const {
    const std::size_t n = static_cast<std::size_t>(sizes_[layer]) *
                          static_cast<std::size_t>(sizes_[layer + 1]);
    return {params_.data() + w_offset_[layer], n};
}

std::span<const double> DenseNet::bias(std::size_t layer) const {
    return {params_.data() + b_offset_[layer], static_cast<std::size_t>(sizes_[layer + 1])};
}

namespace {

void affine(std::span<const double> input, std::span<const double> w, std::span<const double> b,
            std::span<double> out) {
    const std::size_t in_dim = input.size();
    for (std::size_t o = 0; o < out.size(); ++o) {
        const double* row = w.data() + o * in_dim;
        double acc = b[o];
        for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * input[i];
        out[o] = acc;
    }
}

}  // namespace

void DenseNet::forward(std::span<const double> input, std::span<double> output) const {
    if (input.size() != static_cast<std::size_t>(sizes_.front()) ||
        output.size() != static_cast<std::size_t>(sizes_.back())) {
        throw std::invalid_argument("DenseNet::forward: dimension mismatch");
    }
    std::vector<double> buf_a(input.begin(), input.end());
    std::vector<double> buf_b;
    for (std::size_t l = 0; l < num_layers(); ++l) {
        buf_b.assign(static_cast<std::size_t>(sizes_[l + 1]), 0.0);
        affine(buf_a, weight(l), bias(l), buf_b);
        if (l + 1 < num_layers()) {
            for (double& v : buf_b) v = std::max(0.0, v);
        } else {
            for (int u = 0; u < head_.tanh_units; ++u) {
                auto& v = buf_b[static_cast<std::size_t>(u)];
                v = std::tanh(v);
            }
            for (int u = 0; u < head_.logistic_units; ++u) {
                auto& v = buf_b[static_cast<std::size_t>(head_.tanh_units + u)];
                v = 1.0 / (1.0 + std::exp(-v));
            }
        }
        buf_a.swap(buf_b);
    }
    std::copy(buf_a.begin(), buf_a.end(), output.begin());
}

std::vector<double> DenseNet::forward(std::span<const double> input) const {
    std::vector<double> out(static_cast<std::size_t>(sizes_.back()));
    forward(input, out);
    return out;
}

void DenseNet::forward_cached(std::span<const double> input, Workspace& ws) const {
    const std::size_t n_layers = num_layers();
    ws.pre.resize(n_layers);
    ws.act.resize(n_layers + 1);
    ws.act[0].assign(input.begin(), input.end());
    for (std::size_t l = 0; l < n_layers; ++l) {
        ws.pre[l].assign(static_cast<std::size_t>(sizes_[l + 1]), 0.0);
        affine(ws.act[l], weight(l), bias(l), ws.pre[l]);
        ws.act[l + 1] = ws.pre[l];
        if (l + 1 < n_layers) {
            for (double& v : ws.act[l + 1]) v = std::max(0.0, v);
        } else {
            auto& out = ws.act[l + 1];
            for (int u = 0; u < head_.tanh_units; ++u) {
                auto& v = out[static_cast<std::size_t>(u)];
                v = std::tanh(v);
            }
            for (int u = 0; u < head_.logistic_units; ++u) {
                auto& v = out[static_cast<std::size_t>(head_.tanh_units + u)];
                v = 1.0 / (1.0 + std::exp(-v));
            }
        }
    }
}

void DenseNet::backward(const Workspace& ws, std::span<const double> grad_output,
                        std::span<double> grad_params, Workspace& scratch) const {
    const std::size_t n_layers = num_layers();
    scratch.delta.resize(n_layers);

    // Head derivative: grad wrt pre-activation of the output layer.
    auto& out_delta = scratch.delta[n_layers - 1];
    out_delta.assign(grad_output.begin(), grad_output.end());
    const auto& y = ws.act[n_layers];
    for (int u = 0; u < head_.tanh_units; ++u) {
        const double v = y[static_cast<std::size_t>(u)];
        out_delta[static_cast<std::size_t>(u)] *= 1.0 - v * v;
    }
    for (int u = 0; u < head_.logistic_units; ++u) {
        const double v = y[static_cast<std::size_t>(head_.tanh_units + u)];
        out_delta[static_cast<std::size_t>(head_.tanh_units + u)] *= v * (1.0 - v);
    }

    for (std::size_t l = n_layers; l-- > 0;) {
        const std::size_t in_dim = static_cast<std::size_t>(sizes_[l]);
        const std::size_t out_dim = static_cast<std::size_t>(sizes_[l + 1]);
        double* gw = grad_params.data() + w_offset_[l];
        double* gb = grad_params.data() + b_offset_[l];
        const auto& delta = scratch.delta[l];
        const auto& input = ws.act[l];
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double d = delta[o];
            gb[o] += d;
            if (d == 0.0) continue;
            double* row = gw + o * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) row[i] += d * input[i];
        }
        if (l > 0) {
            auto& prev_delta = scratch.delta[l - 1];
            prev_delta.assign(in_dim, 0.0);
            const double* w = params_.data() + w_offset_[l];
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double d = delta[o];
                if (d == 0.0) continue;
                const double* row = w + o * in_dim;
                for (std::size_t i = 0; i < in_dim; ++i) prev_delta[i] += d * row[i];
            }
            const auto& pre = ws.pre[l - 1];
            for (std::size_t i = 0; i < in_dim; ++i) {
                if (pre[i] <= 0.0) prev_delta[i] = 0.0;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic "RDPN", version, layer count, sizes, head,
// then the flat parameter buffer.
// ---------------------------------------------------------------------------

namespace {

constexpr char kNetMagic[4] = {'R', 'D', 'P', 'N'};
constexpr std::uint32_t kNetVersion = 1;

}  // namespace

void save_net(const DenseNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_net: cannot open " + path);
    out.write(kNetMagic, 4);
    const std::uint32_t version = kNetVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::uint32_t n_sizes = static_cast<std::uint32_t>(net.sizes().size());
    out.write(reinterpret_cast<const char*>(&n_sizes), 4);
    for (int s : net.sizes()) {
        const std::uint32_t v = static_cast<std::uint32_t>(s);
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    const std::uint32_t tanh_units = static_cast<std::uint32_t>(net.head().tanh_units);
    const std::uint32_t logistic_units = static_cast<std::uint32_t>(net.head().logistic_units);
    out.write(reinterpret_cast<const char*>(&tanh_units), 4);
    out.write(reinterpret_cast<const char*>(&logistic_units), 4);
    out.write(reinterpret_cast<const char*>(net.params().data()),
              static_cast<std::streamsize>(net.params().size() * sizeof(double)));
    if (!out) throw std::runtime_error("save_net: write failed for " + path);
}

DenseNet load_net(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_net: cannot open " + path);
    char magic[4] = {};
    if (!in.read(magic, 4) || std::memcmp(magic, kNetMagic, 4) != 0) {
        throw std::runtime_error("load_net: not a checkpoint file: " + path);
    }
    std::uint32_t version = 0;
    if (!in.read(reinterpret_cast<char*>(&version), 4) || version != kNetVersion) {
        throw std::runtime_error("load_net: unsupported checkpoint version");
    }
    std::uint32_t n_sizes = 0;
    if (!in.read(reinterpret_cast<char*>(&n_sizes), 4) || n_sizes < 2) {
        throw std::runtime_error("load_net: corrupt checkpoint header");
    }
    std::vector<int> sizes(n_sizes);
    for (auto& s : sizes) {
        std::uint32_t v = 0;
        if (!in.read(reinterpret_cast<char*>(&v), 4)) {
            throw std::runtime_error("load_net: truncated checkpoint");
        }
        s = static_cast<int>(v);
    }
    std::uint32_t tanh_units = 0;
    std::uint32_t logistic_units = 0;
    if (!in.read(reinterpret_cast<char*>(&tanh_units), 4) ||
        !in.read(reinterpret_cast<char*>(&logistic_units), 4)) {
        throw std::runtime_error("load_net: truncated checkpoint");
    }
    DenseNet net(sizes, OutputSpec{static_cast<int>(tanh_units), static_cast<int>(logistic_units)},
                 0);
    if (!in.read(reinterpret_cast<char*>(net.params().data()),
                 static_cast<std::streamsize>(net.params().size() * sizeof(double)))) {
        throw std::runtime_error("load_net: truncated parameters");
    }
    char extra = 0;
    if (in.read(&extra, 1)) throw std::runtime_error("load_net: trailing bytes in " + path);
    return net;
}

TrainResult train(DenseNet& net, const LabeledDataset& data, const TrainConfig& config,
                  const LossFn& loss) {
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (config.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (data.obs_dim != net.input_size()) {
        throw std::invalid_argument("train: observation dim does not match net input");
    }

    const std::size_t n = data.size();
    const std::size_t n_params = net.num_params();
    std::vector<double> grad(n_params, 0.0);
    std::vector<double> adam_m(n_params, 0.0);
    std::vector<double> adam_v(n_params, 0.0);
    const double beta1 = 0.9;
    const double beta2 = 0.999;
    const double adam_eps = 1e-8;
    long step = 0;

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(config.seed);

    DenseNet::Workspace ws;
    DenseNet::Workspace scratch;
    std::vector<double> grad_out(static_cast<std::size_t>(net.output_size()));

    TrainResult result;
    result.epoch_loss.reserve(static_cast<std::size_t>(config.epochs));
    const std::size_t batch = static_cast<std::size_t>(std::max(1, config.batch_size));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = rng.uniform_index(i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(n, start + batch);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t b = start; b < end; ++b) {
                const std::size_t idx = order[b];
                net.forward_cached(data.obs_row(idx), ws);
                std::fill(grad_out.begin(), grad_out.end(), 0.0);
                epoch_loss += loss(ws.act.back(), idx, grad_out);
                net.backward(ws, grad_out, grad, scratch);
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            ++step;
            const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            double* params = net.params().data();
            for (std::size_t i = 0; i < n_params; ++i) {
                const double g = grad[i] * inv;
                adam_m[i] = beta1 * adam_m[i] + (1.0 - beta1) * g;
                adam_v[i] = beta2 * adam_v[i] + (1.0 - beta2) * g * g;
                params[i] -= config.learning_rate * (adam_m[i] / bc1) /
                             (std::sqrt(adam_v[i] / bc2) + adam_eps);
            }
        }
        epoch_loss /= static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) {
            throw std::runtime_error("train: loss became non-finite at epoch " +
                                     std::to_string(epoch));
        }
        result.epoch_loss.push_back(epoch_loss);
    }
    return result;
}

}  // namespace nn
}  // namespace rdp
