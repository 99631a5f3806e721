#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>

#include "rdp/risk_table.hpp"
#include "rdp/rng.hpp"
#include "rdp/sampling.hpp"

using rdp::Grid;
using rdp::RiskLevel;
using rdp::RiskTable;

namespace {

// Table whose (cell, error) distribution is a point mass at value(cell, eps),
// so cvar == value at every alpha and the interpolation math is transparent.
RiskTable point_mass_table(Grid state_grid, Grid error_grid, std::vector<double> support,
                           const std::function<double(std::size_t, std::size_t)>& value) {
    const std::size_t n_atoms = support.size();
    std::vector<double> probs(state_grid.num_cells() * error_grid.num_cells() * n_atoms, 0.0);
    for (std::size_t cell = 0; cell < state_grid.num_cells(); ++cell) {
        for (std::size_t e = 0; e < error_grid.num_cells(); ++e) {
            std::span<double> row(probs.data() + (cell * error_grid.num_cells() + e) * n_atoms,
                                  n_atoms);
            rdp::dist::project_into(support, value(cell, e), 1.0, row);
        }
    }
    return RiskTable(std::move(state_grid), std::move(error_grid), std::move(support),
                     std::move(probs));
}

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("risk at grid points reproduces stored distributions; interpolation averages") {
    // 1D state axis {0, 1}, errors {0, 1}; value = 2*cell + eps (on atoms).
    auto table = point_mass_table(Grid({{0.0, 1.0}}), Grid({{0.0, 1.0}}),
                                  {0.0, 1.0, 2.0, 3.0},
                                  [](std::size_t cell, std::size_t e) {
                                      return 2.0 * static_cast<double>(cell) +
                                             static_cast<double>(e);
                                  });
    const double at0[1] = {0.0};
    const double at1[1] = {1.0};
    const double mid[1] = {0.5};
    for (double alpha : {0.0, 0.5, 0.9}) {
        CHECK(table.risk(std::span<const double>(at0, 1), std::size_t{1}, RiskLevel(alpha)) ==
              doctest::Approx(1.0).epsilon(1e-12));
        CHECK(table.risk(std::span<const double>(at1, 1), std::size_t{0}, RiskLevel(alpha)) ==
              doctest::Approx(2.0).epsilon(1e-12));
        // midway: average of the two cvar values
        CHECK(table.risk(std::span<const double>(mid, 1), std::size_t{0}, RiskLevel(alpha)) ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(table.risk(std::span<const double>(at0, 1), std::size_t{7}, RiskLevel(0.0)),
                    std::invalid_argument);
}

TEST_CASE("alpha zero risk equals the interpolated mean") {
    Grid sg({{0.0, 1.0}});
    Grid eg({{0.0, 1.0}});
    const std::vector<double> support{0.0, 1.0, 2.0};
    std::vector<double> probs;
    for (int row = 0; row < 4; ++row) {
        probs.insert(probs.end(), {0.25, 0.5, 0.25});
    }
    RiskTable table(sg, eg, support, probs);
    const double mid[1] = {0.3};
    CHECK(table.risk(std::span<const double>(mid, 1), std::size_t{0}, RiskLevel(0.0)) ==
          doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("risk gradient slopes and clamping") {
    // errors on a 1D axis {-0.1, 0, 0.1} with risks 1.0, 1.0, 2.0.
    auto table = point_mass_table(Grid({{0.0, 1.0}}), Grid({{-0.1, 0.0, 0.1}}),
                                  {0.0, 1.0, 2.0, 3.0},
                                  [](std::size_t, std::size_t e) {
                                      return e == 2 ? 2.0 : 1.0;
                                  });
    const double x[1] = {0.0};
    // Midway between atoms 0.0 (risk 1) and 0.1 (risk 2): slope 10 on that axis.
    const double eps_mid[1] = {0.05};
    auto grad = table.risk_gradient(std::span<const double>(x, 1),
                                    std::span<const double>(eps_mid, 1), RiskLevel(0.0));
    CHECK(grad[0] == doctest::Approx(10.0).epsilon(1e-12));

    // Flat region between -0.1 and 0: zero gradient.
    const double eps_flat[1] = {-0.05};
    grad = table.risk_gradient(std::span<const double>(x, 1),
                               std::span<const double>(eps_flat, 1), RiskLevel(0.0));
    CHECK(grad[0] == doctest::Approx(0.0));

    // Outside the hull: clamped, zero slope in the clamped direction.
    const double eps_out[1] = {0.5};
    grad = table.risk_gradient(std::span<const double>(x, 1),
                               std::span<const double>(eps_out, 1), RiskLevel(0.0));
    CHECK(grad[0] == 0.0);

    // At the interior knot 0.0: right-cell subgradient.
    const double eps_knot[1] = {0.0};
    grad = table.risk_gradient(std::span<const double>(x, 1),
                               std::span<const double>(eps_knot, 1), RiskLevel(0.0));
    CHECK(grad[0] == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("risk gradient matches central finite differences away from knots") {
    rdp::Rng rng(99);
    auto table = point_mass_table(
        Grid({{-1.0, 0.0, 1.0}}), Grid({{-0.4, -0.1, 0.0, 0.2, 0.4}, {-1.0, 0.0, 1.0}}),
        rdp::uniform_axis(0.0, 8.0, 30), [](std::size_t cell, std::size_t e) {
            return 0.3 * static_cast<double>(cell) + 0.37 * static_cast<double>(e % 7) + 2.0;
        });
    const double h = 1e-4;
    for (int trial = 0; trial < 50; ++trial) {
        const double x[1] = {rng.uniform(-1.0, 1.0)};
        double eps[2] = {rng.uniform(-0.38, 0.38), rng.uniform(-0.95, 0.95)};
        for (double knot : {-0.4, -0.1, 0.0, 0.2, 0.4}) {
            if (std::abs(eps[0] - knot) < 5 * h) eps[0] += 10 * h;
        }
        for (double knot : {-1.0, 0.0, 1.0}) {
            if (std::abs(eps[1] - knot) < 5 * h) eps[1] += 10 * h;
        }
        const double alpha = rng.uniform(0.0, 0.9);
        const auto grad = table.risk_gradient(std::span<const double>(x, 1),
                                              std::span<const double>(eps, 2),
                                              RiskLevel(alpha));
        for (int axis = 0; axis < 2; ++axis) {
            double lo[2] = {eps[0], eps[1]};
            double hi[2] = {eps[0], eps[1]};
            lo[axis] -= h;
            hi[axis] += h;
            const double fd = (table.risk(std::span<const double>(x, 1),
                                          std::span<const double>(hi, 2), RiskLevel(alpha)) -
                               table.risk(std::span<const double>(x, 1),
                                          std::span<const double>(lo, 2), RiskLevel(alpha))) /
                              (2 * h);
            const double scale = std::max(1.0, std::abs(fd));
            CHECK(std::abs(grad[axis] - fd) / scale < 1e-6);
        }
    }
}

TEST_CASE("risk weight is max-over-atoms minus zero-error risk") {
    auto table = point_mass_table(Grid({{0.0, 1.0}}), Grid({{0.0, 1.0}}),
                                  {0.0, 1.0, 2.0, 3.0, 4.0, 5.0},
                                  [](std::size_t, std::size_t e) {
                                      return e == 0 ? 1.0 : 4.0;
                                  });
    const double x[1] = {0.25};
    CHECK(table.risk_weight(std::span<const double>(x, 1), RiskLevel(0.0)) ==
          doctest::Approx(3.0).epsilon(1e-12));

    auto flat = point_mass_table(Grid({{0.0, 1.0}}), Grid({{0.0, 1.0}}),
                                 {0.0, 1.0, 2.0}, [](std::size_t, std::size_t) { return 1.0; });
    CHECK(flat.risk_weight(std::span<const double>(x, 1), RiskLevel(0.5)) ==
          doctest::Approx(0.0));

    rdp::Rng rng(3);
    auto random_table = point_mass_table(
        Grid({{0.0, 0.5, 1.0}}), Grid({{-1.0, 0.0, 1.0}}), rdp::uniform_axis(0.0, 4.0, 9),
        [&rng](std::size_t, std::size_t) { return rng.uniform(0.0, 4.0); });
    for (int trial = 0; trial < 100; ++trial) {
        const double q[1] = {rng.uniform(0.0, 1.0)};
        CHECK(random_table.risk_weight(std::span<const double>(q, 1), RiskLevel(0.3)) >=
              -1e-12);
    }
}

TEST_CASE("rejection sampling: uniform field stays uniform") {
    auto table = point_mass_table(Grid({{0.0, 1.0}, {0.0, 2.0}}), Grid({{0.0, 1.0}}),
                                  {0.0, 1.0, 2.0},
                                  [](std::size_t, std::size_t e) {
                                      return e == 0 ? 0.0 : 1.0;
                                  });
    const auto samples = rdp::rejection_sample_states(table, RiskLevel(0.0), 10000, 17);
    REQUIRE(samples.size() == 10000);
    // chi-square over a 4x4 binning; 15 dof, p > 0.01 threshold 30.58
    int counts[16] = {};
    for (const auto& s : samples) {
        const int bi = std::min(3, static_cast<int>(s[0] * 4.0));
        const int bj = std::min(3, static_cast<int>(s[1] / 2.0 * 4.0));
        counts[bi * 4 + bj]++;
    }
    const double expected = 10000.0 / 16.0;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < 30.58);
}

TEST_CASE("rejection sampling: half-space indicator confines samples") {
    // weight 1 for x >= 0.5 region nodes, 0 below.
    auto table = point_mass_table(Grid({{0.0, 0.5, 1.0}}), Grid({{0.0, 1.0}}),
                                  {0.0, 1.0, 2.0},
                                  [](std::size_t cell, std::size_t e) {
                                      if (e == 0) return 0.0;
                                      return cell >= 1 ? 1.0 : 0.0;
                                  });
    const auto samples = rdp::rejection_sample_states(table, RiskLevel(0.0), 2000, 5);
    for (const auto& s : samples) CHECK(s[0] > 0.0);

    auto dead = point_mass_table(Grid({{0.0, 1.0}}), Grid({{0.0, 1.0}}), {0.0, 1.0, 2.0},
                                 [](std::size_t, std::size_t) { return 1.0; });
    CHECK_THROWS_AS(rdp::rejection_sample_states(dead, RiskLevel(0.0), 10, 1),
                    std::runtime_error);
}

TEST_CASE("rejection sampling density tracks a linear weight field") {
    // w(x) = 1 + 2x over [0, 1] (node weights 1 and 3).
    auto table = point_mass_table(Grid({{0.0, 1.0}}), Grid({{0.0, 1.0}}),
                                  rdp::uniform_axis(0.0, 4.0, 9),
                                  [](std::size_t cell, std::size_t e) {
                                      if (e == 0) return 0.0;
                                      return cell == 0 ? 1.0 : 3.0;
                                  });
    const std::size_t n = 100000;
    const auto samples = rdp::rejection_sample_states(table, RiskLevel(0.0), n, 31);
    const int n_bins = 10;
    int counts[10] = {};
    for (const auto& s : samples) {
        counts[std::min(n_bins - 1, static_cast<int>(s[0] * n_bins))]++;
    }
    for (int b = 0; b < n_bins; ++b) {
        const double lo = b / 10.0;
        const double hi = lo + 0.1;
        // integral of (1 + 2x)/2 over the bin
        const double expected = n * (hi - lo) * (1.0 + lo + hi) / 2.0;
        CHECK(std::abs(counts[b] - expected) / expected < 0.05);
    }
}

TEST_CASE("save/load round trip is lossless and byte-identical") {
    rdp::Rng rng(8);
    auto table = point_mass_table(
        Grid({{-1.0, 0.0, 2.0}, {0.0, 1.0}}, {3}), Grid({{0.0, 1.0}}),
        rdp::uniform_axis(0.0, 5.0, 11),
        [&rng](std::size_t, std::size_t) { return rng.uniform(0.0, 5.0); });

    const auto path_a = temp_path("rdp_table_a.bin");
    const auto path_b = temp_path("rdp_table_b.bin");
    rdp::save_table(table, path_a.string());
    auto loaded = rdp::load_table(path_a.string());
    rdp::save_table(loaded, path_b.string());

    std::ifstream fa(path_a, std::ios::binary);
    std::ifstream fb(path_b, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(fa)),
                              std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(fb)),
                              std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);
    CHECK(!bytes_a.empty());

    rdp::Rng qrng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const double x[2] = {qrng.uniform(-1.0, 2.0), qrng.uniform(0.0, 1.0)};
        const int d[1] = {static_cast<int>(qrng.uniform_index(3))};
        const double alpha = qrng.uniform(0.0, 0.99);
        const double before = table.risk(std::span<const double>(x, 2),
                                         std::span<const int>(d, 1), std::size_t{1},
                                         RiskLevel(alpha));
        const double after = loaded.risk(std::span<const double>(x, 2),
                                         std::span<const int>(d, 1), std::size_t{1},
                                         RiskLevel(alpha));
        CHECK(before == doctest::Approx(after).epsilon(1e-12));
    }
    std::filesystem::remove(path_a);
    std::filesystem::remove(path_b);
}

TEST_CASE("load rejects truncation, bad magic, and bad versions") {
    auto table = point_mass_table(Grid({{0.0, 1.0}}), Grid({{0.0, 1.0}}), {0.0, 1.0, 2.0},
                                  [](std::size_t, std::size_t) { return 1.0; });
    const auto path = temp_path("rdp_table_trunc.bin");
    rdp::save_table(table, path.string());

    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(rdp::load_table(path.string()), std::runtime_error);

    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "NOPE garbage";
    }
    CHECK_THROWS_AS(rdp::load_table(path.string()), std::runtime_error);

    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write("RDPT", 4);
        const std::uint32_t version = 999;
        out.write(reinterpret_cast<const char*>(&version), 4);
    }
    CHECK_THROWS_AS(rdp::load_table(path.string()), std::runtime_error);
    std::filesystem::remove(path);
}
