#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "rdp/pendulum_pipeline.hpp"
#include "rdp/sampling.hpp"
#include "rdp/solver.hpp"

using namespace rdp;
using namespace rdp::pendulum;

namespace {

const PendulumProblem& problem() {
    static PendulumProblem p = build_pendulum_mdp();
    return p;
}

const RiskTable& solved_table() {
    static RiskTable table = [] {
        SolveOptions options;
        options.jobs = 2;
        return solve(problem().mdp, problem().cost_support, options);
    }();
    return table;
}

}  // namespace

TEST_CASE("risk asymmetry at s = [0.2, 0] and growth in alpha") {
    const auto& table = solved_table();
    const double s[2] = {0.2, 0.0};
    const double neg[2] = {-0.2, 0.0};
    const double pos[2] = {0.2, 0.0};
    double prev_mean_risk = -1.0;
    for (double alpha : {0.0, 0.5, 0.99}) {
        const double rho_neg = table.risk(s, std::span<const double>(neg, 2), RiskLevel(alpha));
        const double rho_pos = table.risk(s, std::span<const double>(pos, 2), RiskLevel(alpha));
        CHECK(rho_neg > rho_pos);

        // mean risk over all error atoms is non-decreasing in alpha
        double mean_risk = 0.0;
        for (std::size_t e = 0; e < table.num_errors(); ++e) {
            mean_risk += table.risk(s, e, RiskLevel(alpha));
        }
        mean_risk /= static_cast<double>(table.num_errors());
        CHECK(mean_risk >= prev_mean_risk - 1e-12);
        prev_mean_risk = mean_risk;
    }
}

TEST_CASE("weight field shape: doomed corners low, central band high") {
    const auto& table = solved_table();
    const RiskLevel alpha(0.2);

    std::vector<double> field;
    const Grid& grid = table.state_grid();
    std::vector<double> x(2);
    std::vector<int> none;
    for (std::size_t cell = 0; cell < grid.num_cells(); ++cell) {
        grid.cell_point(cell, x, none);
        field.push_back(table.risk_weight(x, alpha));
    }
    auto sorted = field;
    std::sort(sorted.begin(), sorted.end());
    const double q25 = sorted[sorted.size() / 4];
    const double field_max = sorted.back();

    // same-sign corners are beyond saving and carry low weight
    const double corner_a[2] = {kQuarterPi * 0.9, 2.0 * 0.9};
    const double corner_b[2] = {-kQuarterPi * 0.9, -2.0 * 0.9};
    CHECK(table.risk_weight(corner_a, alpha) <= q25 + 1e-12);
    CHECK(table.risk_weight(corner_b, alpha) <= q25 + 1e-12);

    // a central-band state carries near-maximal weight
    double band_best = 0.0;
    for (double theta = -0.3; theta <= 0.31; theta += 0.05) {
        for (double omega = -1.0; omega <= 1.01; omega += 0.25) {
            const double q[2] = {theta, omega};
            band_best = std::max(band_best, table.risk_weight(q, alpha));
        }
    }
    CHECK(band_best > 0.7 * field_max);
}

TEST_CASE("monte carlo rollouts of the pendulum mdp agree with risk at alpha 0") {
    const auto& table = solved_table();
    const auto& mdp = problem().mdp;
    const auto& omega_axis = mdp.grid.axis(1);
    const std::size_t ti = 25;  // positive theta node
    const std::size_t oi = 20;  // omega = 0 node
    const std::size_t cell = ti * omega_axis.size() + oi;
    REQUIRE(omega_axis[oi] == doctest::Approx(0.0));

    Rng rng(31);
    const int n = 100000;
    const std::size_t eps = 60;  // center error atom
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = oracle::rollout_return(mdp, mdp.horizon - 1, cell, eps, rng);
        sum += r;
        sum_sq += r * r;
    }
    const double mc_mean = sum / n;
    const double mc_se = std::sqrt((sum_sq / n - mc_mean * mc_mean) / (n - 1));
    const double solved = table.risk_at(cell, eps, RiskLevel(0.0));
    CHECK(std::abs(solved - mc_mean) <= 3.0 * mc_se + 1e-9);
}

TEST_CASE("rejection sampling tracks the pendulum weight field") {
    const auto& table = solved_table();
    const RiskLevel alpha(0.2);
    const std::size_t n = 100000;
    const auto samples = rejection_sample_states(table, alpha, n, 417);

    // direct binning oracle: acceptance mass per 8x8 state bin
    const int bins = 8;
    const double theta_span = 2.0 * kQuarterPi;
    const double omega_span = 4.0;
    std::vector<double> expected(bins * bins, 0.0);
    const int sub = 6;  // numerical integration per bin
    double total = 0.0;
    for (int bi = 0; bi < bins; ++bi) {
        for (int bj = 0; bj < bins; ++bj) {
            double mass = 0.0;
            for (int si = 0; si < sub; ++si) {
                for (int sj = 0; sj < sub; ++sj) {
                    const double x[2] = {
                        -kQuarterPi + theta_span * (bi + (si + 0.5) / sub) / bins,
                        -2.0 + omega_span * (bj + (sj + 0.5) / sub) / bins};
                    mass += table.risk_weight(x, alpha);
                }
            }
            expected[static_cast<std::size_t>(bi * bins + bj)] = mass;
            total += mass;
        }
    }
    std::vector<double> counts(bins * bins, 0.0);
    for (const auto& s : samples) {
        const int bi = std::min(bins - 1, static_cast<int>((s[0] + kQuarterPi) / theta_span * bins));
        const int bj = std::min(bins - 1, static_cast<int>((s[1] + 2.0) / omega_span * bins));
        counts[static_cast<std::size_t>(bi * bins + bj)] += 1.0;
    }
    for (std::size_t b = 0; b < expected.size(); ++b) {
        const double want = expected[b] / total;
        if (want < 0.02) continue;  // high-mass bins only
        const double got = counts[b] / static_cast<double>(n);
        CHECK(std::abs(got - want) / want < 0.05);
    }
}

TEST_CASE("risk loss decomposes exactly into baseline plus lambda times the risk term") {
    const auto& table = solved_table();
    LabelScaling scaling;
    DatasetConfig config;
    config.n = 16;
    auto data = generate_dataset(config, &solved_table(), 5);

    RiskLossConfig risk_config;
    risk_config.lambda = 0.7;
    risk_config.alpha = 0.3;
    auto baseline = make_baseline_loss(data, scaling);
    auto risky = make_risk_loss(data, scaling, table, risk_config);

    Rng rng(9);
    std::vector<double> out(2);
    std::vector<double> grad_a(2);
    std::vector<double> grad_b(2);
    for (std::size_t i = 0; i < data.size(); ++i) {
        out[0] = rng.uniform(-0.9, 0.9);
        out[1] = rng.uniform(-0.9, 0.9);
        std::fill(grad_a.begin(), grad_a.end(), 0.0);
        std::fill(grad_b.begin(), grad_b.end(), 0.0);
        const double lb = baseline(out, i, grad_a);
        const double lr = risky(out, i, grad_b);
        const double estimate[2] = {scaling.theta_scale * out[0], scaling.omega_scale * out[1]};
        const double term = risk_term(table, data.state_row(i),
                                      std::span<const double>(estimate, 2), risk_config.alpha);
        CHECK(lr - risk_config.lambda * term == doctest::Approx(lb).epsilon(1e-12));
    }

    // lambda = 0 reduces to the baseline exactly
    RiskLossConfig zero;
    zero.lambda = 0.0;
    auto degenerate = make_risk_loss(data, scaling, table, zero);
    out[0] = 0.3;
    out[1] = -0.2;
    std::fill(grad_a.begin(), grad_a.end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    CHECK(degenerate(out, 0, grad_b) == doctest::Approx(baseline(out, 0, grad_a)));
    CHECK(grad_a[0] == doctest::Approx(grad_b[0]));
    CHECK(grad_a[1] == doctest::Approx(grad_b[1]));
}

TEST_CASE("directional risk: under-reading the angle costs more than over-reading") {
    const auto& table = solved_table();
    LabelScaling scaling;
    nn::LabeledDataset data;
    data.obs_dim = 1;
    data.label_dim = 2;
    data.state_dim = 2;
    data.obs = {0.0};
    data.labels = {0.2 / scaling.theta_scale, 0.0};
    data.states = {0.2, 0.0};

    RiskLossConfig config;
    config.lambda = 1.0;
    config.alpha = 0.0;
    auto loss = make_risk_loss(data, scaling, table, config);
    std::vector<double> grad(2);
    const std::vector<double> under{0.0, 0.0};                        // s_hat = [0, 0]
    const std::vector<double> over{0.4 / scaling.theta_scale, 0.0};  // s_hat = [0.4, 0]
    const double l_under = loss(under, 0, grad);
    const double l_over = loss(over, 0, grad);
    CHECK(l_under > l_over);
}

TEST_CASE("full risk-loss gradient matches finite differences through a small net") {
    const auto& table = solved_table();
    LabelScaling scaling;
    DatasetConfig config;
    config.n = 6;
    config.render.resolution = 8;  // tiny observations for a tiny net
    auto data = generate_dataset(config, &solved_table(), 21);

    nn::DenseNet net({2 * 8 * 8, 6, 2}, nn::OutputSpec{2, 0}, 3);
    RiskLossConfig risk_config;
    risk_config.lambda = 0.5;
    risk_config.alpha = 0.2;
    auto loss = make_risk_loss(data, scaling, table, risk_config);

    nn::DenseNet::Workspace ws;
    nn::DenseNet::Workspace scratch;
    std::vector<double> grad(net.num_params(), 0.0);
    std::vector<double> grad_out(2, 0.0);
    const std::size_t sample = 2;
    net.forward_cached(data.obs_row(sample), ws);
    loss(ws.act.back(), sample, grad_out);
    net.backward(ws, grad_out, grad, scratch);

    const auto loss_at = [&](const nn::DenseNet& n) {
        const auto out = n.forward(data.obs_row(sample));
        std::vector<double> g(2);
        return loss(out, sample, g);
    };
    const double h = 1e-5;
    nn::DenseNet probe = net;
    Rng pick(7);
    int checked = 0;
    while (checked < 120) {
        const std::size_t i = pick.uniform_index(net.num_params());
        const double saved = probe.params()[i];
        probe.params()[i] = saved + h;
        const double up = loss_at(probe);
        probe.params()[i] = saved - h;
        const double down = loss_at(probe);
        probe.params()[i] = saved;
        const double fd = (up - down) / (2 * h);
        const double scale = std::max({1.0, std::abs(fd), std::abs(grad[i])});
        CHECK(std::abs(grad[i] - fd) / scale < 1e-4);
        ++checked;
    }
}

TEST_CASE("dataset generation: determinism, provenance, and sane uniform spread") {
    const auto& table = solved_table();
    DatasetConfig config;
    config.n = 400;
    auto a = generate_dataset(config, &table, 77);
    auto b = generate_dataset(config, &table, 77);
    CHECK(a.obs == b.obs);
    CHECK(a.labels == b.labels);
    CHECK(a.provenance == nn::LabeledDataset::Provenance::uniform);

    double mean_theta = 0.0;
    double mean_omega = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_theta += a.state_row(i)[0];
        mean_omega += a.state_row(i)[1];
    }
    mean_theta /= static_cast<double>(a.size());
    mean_omega /= static_cast<double>(a.size());
    // 3 standard errors of a uniform over the full state ranges
    CHECK(std::abs(mean_theta) < 3.0 * (2.0 * config.theta_range / std::sqrt(12.0)) /
                                     std::sqrt(static_cast<double>(a.size())));
    CHECK(std::abs(mean_omega) < 3.0 * (2.0 * config.omega_range / std::sqrt(12.0)) /
                                     std::sqrt(static_cast<double>(a.size())));

    DatasetConfig weighted = config;
    weighted.kind = DatasetKind::risk_weighted;
    weighted.n = 60;
    weighted.alpha = 0.2;
    auto w = generate_dataset(weighted, &table, 78);
    CHECK(w.provenance == nn::LabeledDataset::Provenance::risk_weighted);
    for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(table.risk_weight(w.state_row(i), RiskLevel(0.2)) > 0.0);
    }
    CHECK_THROWS_AS(generate_dataset(weighted, nullptr, 1), std::invalid_argument);
}

TEST_CASE("mttf: oracle stays up, a frozen estimate falls") {
    MttfConfig config;
    config.n_trials = 2;
    config.n_trajectories = 40;
    config.jobs = 2;
    const auto oracle_result = evaluate_mttf(oracle_perceiver(), config, 12);
    CHECK(oracle_result.mean == doctest::Approx(500.0));
    CHECK(oracle_result.std_error == doctest::Approx(0.0));

    const auto frozen = evaluate_mttf(constant_perceiver({0.0, 0.0}), config, 12);
    CHECK(frozen.mean < 500.0);

    const auto again = evaluate_mttf(constant_perceiver({0.0, 0.0}), config, 12);
    CHECK(frozen.mean == doctest::Approx(again.mean));  // seeded determinism
}
