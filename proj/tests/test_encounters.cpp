#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "rdp/encounters.hpp"
#include "rdp/solver.hpp"

using namespace rdp;
using namespace rdp::enc;

namespace {

const daa::DaaPolicy& policy() {
    static daa::DaaPolicy p = daa::solve_controller();
    return p;
}

const RiskTable& marginal_table() {
    static RiskTable table = [] {
        auto problem = daa::build_daa_risk_mdp(policy(), daa::DetectionModel{});
        SolveOptions options;
        options.keep = SolveOptions::Keep::all_slices;
        options.jobs = 2;
        const auto full = solve(problem.mdp, problem.cost_support, options);
        const auto occupancy = occupancy_weights(policy(), daa::GridConfig{}, 500, 7);
        return daa::marginalize_table(full, occupancy);
    }();
    return table;
}

}  // namespace

TEST_CASE("encounter construction puts the closest approach at t = 40") {
    Rng rng(123);
    for (int i = 0; i < 10000; ++i) {
        const auto enc = sample_encounter(rng.next_u64());
        const auto& f = enc.features;
        CHECK(f.own_speed >= 45.0);
        CHECK(f.own_speed <= 55.0);
        CHECK(f.hmd >= 0.0);
        CHECK(f.hmd <= 100.0);
        CHECK(std::abs(f.vmd) <= 50.0);
        CHECK(f.rel_heading_deg >= 120.0);
        CHECK(f.rel_heading_deg <= 240.0);

        CHECK(enc.horizontal_separation(kCpaSecond) == doctest::Approx(f.hmd).epsilon(1e-9));
        const double vsep = std::abs(enc.ownship[kCpaSecond][2] - enc.intruder[kCpaSecond][2]);
        CHECK(vsep == doctest::Approx(std::abs(f.vmd)).epsilon(1e-9));
        // CPA is the minimum over the trace
        for (int t = 0; t <= kEncounterSeconds; ++t) {
            CHECK(enc.horizontal_separation(t) >= f.hmd - 1e-6);
        }
    }
}

TEST_CASE("nmac thresholds are strict") {
    CHECK(is_nmac(30.0, 80.0));
    CHECK(!is_nmac(60.0, 80.0));
    CHECK(is_nmac(49.99, 99.99));
    CHECK(!is_nmac(50.0, 100.0));
    CHECK(!is_nmac(50.0, 80.0));
    CHECK(!is_nmac(30.0, 100.0));
    CHECK_THROWS_AS(is_nmac(-1.0, 50.0), std::invalid_argument);
}

TEST_CASE("never-detect always collides; perfect perception nearly never") {
    Perceiver never;
    never.kind = Perceiver::Kind::never_detect;
    Perceiver perfect;
    perfect.kind = Perceiver::Kind::perfect;
    SimConfig config;

    Rng rng(2026);
    int nmac_never = 0;
    int nmac_perfect = 0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) {
        const auto encounter = sample_encounter(rng.next_u64());
        const auto seed = rng.next_u64();
        const auto sim_never = simulate(encounter, policy(), never, nullptr, config, seed);
        const auto sim_perfect = simulate(encounter, policy(), perfect, nullptr, config, seed);
        nmac_never += sim_never.nmac;
        nmac_perfect += sim_perfect.nmac;
    }
    CHECK(nmac_never == n);
    CHECK(nmac_perfect <= n / 50);  // 2%
}

TEST_CASE("detection monotonicity: never >= stochastic model >= perfect") {
    Perceiver never;
    never.kind = Perceiver::Kind::never_detect;
    Perceiver perfect;
    perfect.kind = Perceiver::Kind::perfect;
    daa::DetectionModel model;
    Perceiver stochastic;
    stochastic.kind = Perceiver::Kind::detection_model;
    stochastic.model = &model;
    SimConfig config;

    Rng rng(7);
    int c_never = 0;
    int c_model = 0;
    int c_perfect = 0;
    for (int i = 0; i < 400; ++i) {
        const auto encounter = sample_encounter(rng.next_u64());
        const auto seed = rng.next_u64();
        c_never += simulate(encounter, policy(), never, nullptr, config, seed).nmac;
        c_model += simulate(encounter, policy(), stochastic, nullptr, config, seed).nmac;
        c_perfect += simulate(encounter, policy(), perfect, nullptr, config, seed).nmac;
    }
    CHECK(c_never >= c_model);
    CHECK(c_model >= c_perfect);
}

TEST_CASE("simulation is deterministic and self-consistent") {
    Perceiver perfect;
    perfect.kind = Perceiver::Kind::perfect;
    SimConfig config;
    const auto encounter = sample_encounter(99);
    const auto a = simulate(encounter, policy(), perfect, &marginal_table(), config, 1234);
    const auto b = simulate(encounter, policy(), perfect, &marginal_table(), config, 1234);
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t t = 0; t < a.states.size(); ++t) {
        CHECK(a.states[t].h == b.states[t].h);
        CHECK(a.advisories[t] == b.advisories[t]);
        CHECK(a.risk[t] == b.risk[t]);
    }

    // the nmac flag matches the recorded traces
    bool flag = false;
    for (std::size_t t = 0; t < a.states.size(); ++t) {
        flag = flag || is_nmac(std::abs(a.own_alt[t] - a.intruder_alt[t]),
                               encounter.horizontal_separation(static_cast<int>(t)));
    }
    CHECK(flag == a.nmac);
}

TEST_CASE("marginalized table matches monte carlo under the occupancy mixture") {
    const auto occupancy = occupancy_weights(policy(), daa::GridConfig{}, 500, 7);
    auto problem = daa::build_daa_risk_mdp(policy(), daa::DetectionModel{});
    const auto& marginal = marginal_table();

    // fixed h node and slice; mix (hdot, a_prev) by occupancy
    const auto& h_axis = problem.mdp.grid.axis(0);
    const auto& hdot_axis = problem.mdp.grid.axis(1);
    const std::size_t h_idx = h_axis.size() / 2 + 3;
    const int t = 20;
    const std::size_t eps = 1;

    Rng rng(55);
    const int n = 100000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        // sample (hdot, a_prev) from the occupancy weights
        double u = rng.uniform();
        std::size_t pick = occupancy.w.size() - 1;
        for (std::size_t k = 0; k < occupancy.w.size(); ++k) {
            if (u < occupancy.w[k]) {
                pick = k;
                break;
            }
            u -= occupancy.w[k];
        }
        const std::size_t di = pick / 3;
        const std::size_t ap = pick % 3;
        const std::size_t cell = (h_idx * hdot_axis.size() + di) * 3 + ap;
        const double r = oracle::rollout_return(problem.mdp, t, cell, eps, rng);
        sum += r;
        sum_sq += r * r;
    }
    const double mc_mean = sum / n;
    const double mc_se = std::sqrt((sum_sq / n - mc_mean * mc_mean) / (n - 1));

    const double x[2] = {h_axis[h_idx], static_cast<double>(t)};
    const double solved = marginal.risk(std::span<const double>(x, 2), eps, RiskLevel(0.0));
    CHECK(std::abs(solved - mc_mean) <= 3.0 * mc_se + 0.05);
}

TEST_CASE("evaluate_suite produces consistent reports") {
    std::vector<Perceiver> perceivers(2);
    perceivers[0].kind = Perceiver::Kind::perfect;
    perceivers[1].kind = Perceiver::Kind::never_detect;
    SuiteConfig config;
    config.n_encounters = 100;
    config.trials = 2;
    config.validation_images = 200;
    config.jobs = 2;
    const auto reports = evaluate_suite(policy(), perceivers, marginal_table(), config, 3);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].name == "perfect");
    CHECK(reports[0].nmac_mean <= reports[1].nmac_mean);
    CHECK(reports[1].nmac_mean == doctest::Approx(100.0));
    CHECK(reports[0].pr.recall == doctest::Approx(1.0));
    CHECK(reports[1].pr.recall == doctest::Approx(0.0));
    for (const auto& report : reports) {
        CHECK(report.nmac_counts.size() == 2);
        CHECK(!report.risk_samples.empty());
    }
}
