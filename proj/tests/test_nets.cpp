#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rdp/nets.hpp"
#include "rdp/rng.hpp"

using namespace rdp::nn;

namespace {

// Small labeled dataset with random observations and labels in [-1, 1].
LabeledDataset random_dataset(int n, int obs_dim, int label_dim, std::uint64_t seed) {
    rdp::Rng rng(seed);
    LabeledDataset data;
    data.obs_dim = obs_dim;
    data.label_dim = label_dim;
    data.state_dim = label_dim;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < obs_dim; ++j) data.obs.push_back(rng.uniform(-1.0, 1.0));
        for (int j = 0; j < label_dim; ++j) {
            const double v = rng.uniform(-0.9, 0.9);
            data.labels.push_back(v);
            data.states.push_back(v);
        }
    }
    return data;
}

LossFn mse_loss(const LabeledDataset& data) {
    return [&data](std::span<const double> out, std::size_t idx, std::span<double> grad) {
        const auto label = data.label_row(idx);
        double loss = 0.0;
        for (std::size_t j = 0; j < out.size(); ++j) {
            const double e = out[j] - label[j];
            loss += e * e;
            grad[j] = 2.0 * e;
        }
        return loss;
    };
}

}  // namespace

TEST_CASE("zero parameters give zero output through tanh and logistic heads") {
    DenseNet net({4, 3, 3}, OutputSpec{2, 1}, 7);
    std::fill(net.params().begin(), net.params().end(), 0.0);
    const std::vector<double> input{0.3, -1.0, 2.0, 0.0};
    const auto out = net.forward(input);
    CHECK(out[0] == doctest::Approx(0.0));
    CHECK(out[1] == doctest::Approx(0.0));
    CHECK(out[2] == doctest::Approx(0.5));  // logistic(0)
}

TEST_CASE("forward is deterministic and validates dimensions") {
    DenseNet net({3, 5, 2}, OutputSpec{2, 0}, 11);
    const std::vector<double> input{0.1, 0.2, -0.4};
    CHECK(net.forward(input) == net.forward(input));
    std::vector<double> bad(4, 0.0);
    CHECK_THROWS_AS(net.forward(bad), std::invalid_argument);
    CHECK(net.num_params() == 3 * 5 + 5 + 5 * 2 + 2);
}

TEST_CASE("backward matches central finite differences on a 3-3-2 net") {
    DenseNet net({3, 3, 2}, OutputSpec{1, 1}, 13);
    const std::vector<double> input{0.4, -0.7, 0.9};
    const std::vector<double> target{0.2, 0.6};

    const auto loss_of = [&](const DenseNet& n) {
        const auto out = n.forward(input);
        double loss = 0.0;
        for (std::size_t j = 0; j < out.size(); ++j) {
            const double e = out[j] - target[j];
            loss += e * e;
        }
        return loss;
    };

    DenseNet::Workspace ws;
    DenseNet::Workspace scratch;
    net.forward_cached(input, ws);
    std::vector<double> grad_out(2);
    for (std::size_t j = 0; j < 2; ++j) grad_out[j] = 2.0 * (ws.act.back()[j] - target[j]);
    std::vector<double> grad(net.num_params(), 0.0);
    net.backward(ws, grad_out, grad, scratch);

    const double h = 1e-5;
    DenseNet probe = net;
    for (std::size_t i = 0; i < net.num_params(); ++i) {
        const double saved = probe.params()[i];
        probe.params()[i] = saved + h;
        const double up = loss_of(probe);
        probe.params()[i] = saved - h;
        const double down = loss_of(probe);
        probe.params()[i] = saved;
        const double fd = (up - down) / (2 * h);
        const double scale = std::max({1.0, std::abs(fd), std::abs(grad[i])});
        CHECK(std::abs(grad[i] - fd) / scale < 1e-4);
    }
}

TEST_CASE("training memorizes a single repeated example") {
    LabeledDataset data;
    data.obs_dim = 4;
    data.label_dim = 2;
    data.state_dim = 2;
    for (int i = 0; i < 8; ++i) {
        data.obs.insert(data.obs.end(), {0.5, -0.5, 0.25, 1.0});
        data.labels.insert(data.labels.end(), {0.3, -0.6});
        data.states.insert(data.states.end(), {0.3, -0.6});
    }
    DenseNet net({4, 16, 2}, OutputSpec{2, 0}, 3);
    TrainConfig config;
    config.epochs = 400;
    config.batch_size = 8;
    const auto result = train(net, data, config, mse_loss(data));
    CHECK(result.epoch_loss.back() < 1e-4);
    CHECK(result.epoch_loss.back() < result.epoch_loss.front());
}

TEST_CASE("training is deterministic per seed") {
    const auto data = random_dataset(64, 6, 2, 21);
    TrainConfig config;
    config.epochs = 30;
    config.seed = 5;

    DenseNet net_a({6, 8, 2}, OutputSpec{2, 0}, 1);
    DenseNet net_b({6, 8, 2}, OutputSpec{2, 0}, 1);
    const auto ra = train(net_a, data, config, mse_loss(data));
    const auto rb = train(net_b, data, config, mse_loss(data));
    CHECK(ra.epoch_loss.back() == doctest::Approx(rb.epoch_loss.back()).epsilon(1e-12));
    CHECK(net_a.params() == net_b.params());

    config.seed = 6;
    DenseNet net_c({6, 8, 2}, OutputSpec{2, 0}, 1);
    const auto rc = train(net_c, data, config, mse_loss(data));
    CHECK(ra.epoch_loss.back() != rc.epoch_loss.back());
}

TEST_CASE("training aborts with a diagnostic on non-finite loss") {
    const auto data = random_dataset(16, 3, 1, 2);
    DenseNet net({3, 4, 1}, OutputSpec{0, 0}, 1);
    TrainConfig config;
    config.epochs = 3;
    LossFn poison = [](std::span<const double>, std::size_t, std::span<double> grad) {
        grad[0] = 0.0;
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(train(net, data, config, poison), std::runtime_error);
}

TEST_CASE("checkpoint round trip preserves parameters exactly") {
    DenseNet net({5, 7, 3}, OutputSpec{2, 1}, 77);
    const auto path = std::filesystem::temp_directory_path() / "rdp_net.bin";
    save_net(net, path.string());
    const auto loaded = load_net(path.string());
    CHECK(loaded.sizes() == net.sizes());
    CHECK(loaded.head().tanh_units == 2);
    CHECK(loaded.head().logistic_units == 1);
    CHECK(loaded.params() == net.params());

    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "RDPNxx";
    }
    CHECK_THROWS_AS(load_net(path.string()), std::runtime_error);
    std::filesystem::remove(path);
}
