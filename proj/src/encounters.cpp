#include "rdp/encounters.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "rdp/rng.hpp"

namespace rdp {
namespace enc {

double Encounter::horizontal_separation(int t) const {
    const auto& o = ownship[static_cast<std::size_t>(t)];
    const auto& i = intruder[static_cast<std::size_t>(t)];
    return std::hypot(i[0] - o[0], i[1] - o[1]);
}

Encounter sample_encounter(std::uint64_t seed) {
    Rng rng(seed);
    Encounter enc;
    enc.features.own_speed = rng.uniform(45.0, 55.0);
    enc.features.intruder_speed = rng.uniform(45.0, 55.0);
    enc.features.hmd = rng.uniform(0.0, 100.0);
    enc.features.vmd = rng.uniform(-50.0, 50.0);
    enc.features.rel_heading_deg = rng.uniform(120.0, 240.0);
    enc.features.visibility = rng.uniform(0.10, 1.1);
    const bool cpa_side = rng.uniform() < 0.5;

    const double psi = enc.features.rel_heading_deg * M_PI / 180.0;
    const double own_vx = enc.features.own_speed;
    const double int_vx = enc.features.intruder_speed * std::cos(psi);
    const double int_vy = enc.features.intruder_speed * std::sin(psi);
    const double rel_vx = int_vx - own_vx;
    const double rel_vy = int_vy;
    const double rel_speed = std::hypot(rel_vx, rel_vy);

    // Perpendicular to the relative velocity; relative position at CPA.
    const double sign = cpa_side ? 1.0 : -1.0;
    const double nx = sign * (-rel_vy / rel_speed);
    const double ny = sign * (rel_vx / rel_speed);
    const double cpa_x = enc.features.hmd * nx;
    const double cpa_y = enc.features.hmd * ny;
    const double rel0_x = cpa_x - kCpaSecond * rel_vx;
    const double rel0_y = cpa_y - kCpaSecond * rel_vy;

    enc.ownship.resize(kEncounterSeconds + 1);
    enc.intruder.resize(kEncounterSeconds + 1);
    for (int t = 0; t <= kEncounterSeconds; ++t) {
        const double ox = own_vx * t;
        enc.ownship[static_cast<std::size_t>(t)] = {ox, 0.0, 0.0};
        enc.intruder[static_cast<std::size_t>(t)] = {
            ox + rel0_x + rel_vx * t, rel0_y + rel_vy * t, -enc.features.vmd};
    }
    return enc;
}

bool is_nmac(double vertical_sep, double horizontal_sep) {
    if (vertical_sep < 0.0 || horizontal_sep < 0.0) {
        throw std::invalid_argument("is_nmac: separations must be non-negative");
    }
    return vertical_sep < 50.0 && horizontal_sep < 100.0;
}

std::string Perceiver::name() const {
    switch (kind) {
        case Kind::perfect: return "perfect";
        case Kind::never_detect: return "never-detect";
        case Kind::detection_model: return "detection-model";
        case Kind::detector: return "detector";
    }
    return "unknown";
}

SimResult simulate(const Encounter& encounter, const daa::DaaPolicy& policy,
                   const Perceiver& perceiver, const RiskTable* marginal,
                   const SimConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    SimResult result;
    const int n_steps = kEncounterSeconds;
    result.states.reserve(n_steps + 1);

    double own_alt = encounter.ownship[0][2];
    double own_vrate = 0.0;
    bool alerted = false;
    daa::Advisory a_prev = daa::Advisory::coc;

    const double noise[3] = {0.0, config.dynamics.noise_value, -config.dynamics.noise_value};
    const double noise_p0 = 1.0 - 2.0 * config.dynamics.noise_prob;

    for (int t = 0; t <= n_steps; ++t) {
        const double intruder_alt = encounter.intruder[static_cast<std::size_t>(t)][2];
        if (!alerted) own_alt = encounter.ownship[static_cast<std::size_t>(t)][2];
        const double h = own_alt - intruder_alt;
        const int tau = std::max(0, kCpaSecond - t);

        // Controller reading of the relative vertical rate.
        const double hdot_reading =
            alerted ? own_vrate : rng.normal(0.0, config.prealert_hdot_sigma);

        bool detected = false;
        switch (perceiver.kind) {
            case Perceiver::Kind::perfect: detected = true; break;
            case Perceiver::Kind::never_detect: detected = false; break;
            case Perceiver::Kind::detection_model:
                detected = rng.uniform() < perceiver.model->probability(h, tau);
                break;
            case Perceiver::Kind::detector: {
                daa::Geometry geometry{encounter.features.own_speed,
                                       encounter.features.intruder_speed,
                                       encounter.features.rel_heading_deg,
                                       encounter.features.visibility};
                const auto image =
                    render_daa(h, tau, geometry, perceiver.render, rng.next_u64());
                detected = daa::detector_score(*perceiver.net, image) > perceiver.threshold;
                break;
            }
        }

        daa::DaaState state{detected, h, hdot_reading, a_prev, tau};
        daa::Advisory advisory = daa::Advisory::coc;
        if (t < kCpaSecond) {
            advisory = policy.advisory(state);  // COC whenever p = 0
        }
        if (advisory != daa::Advisory::coc) alerted = true;

        const double x[2] = {h, static_cast<double>(tau)};
        const double risk =
            marginal ? marginal->risk(std::span<const double>(x, 2),
                                      detected ? std::size_t{0} : std::size_t{1},
                                      RiskLevel(config.risk_alpha))
                     : 0.0;

        result.states.push_back(state);
        result.detected.push_back(detected);
        result.advisories.push_back(advisory);
        result.own_alt.push_back(own_alt);
        result.intruder_alt.push_back(intruder_alt);
        result.risk.push_back(risk);
        result.nmac = result.nmac ||
                      is_nmac(std::abs(h), encounter.horizontal_separation(t));

        // Advance the ownship vertical state once alerted; the horizontal
        // track always follows the encounter.
        if (alerted && t < n_steps) {
            double delta = 0.0;
            if (advisory != daa::Advisory::coc) {
                delta = std::clamp(daa::commanded_rate(advisory) - own_vrate,
                                   -config.dynamics.max_accel, config.dynamics.max_accel);
            }
            const double u = rng.uniform();
            const double w = u < noise_p0 ? noise[0] : (u < noise_p0 + config.dynamics.noise_prob
                                                            ? noise[1]
                                                            : noise[2]);
            own_alt += own_vrate;
            own_vrate += delta + w;
        }
        a_prev = advisory;
    }
    return result;
}

daa::OccupancyWeights occupancy_weights(const daa::DaaPolicy& policy,
                                        const daa::GridConfig& grid, std::size_t n,
                                        std::uint64_t seed, const SimConfig& config) {
    const auto hdot_axis = log_symmetric_axis(grid.hdot_max, grid.hdot_points, grid.min_fraction);
    daa::OccupancyWeights weights;
    weights.hdot_points = hdot_axis.size();
    weights.w.assign(hdot_axis.size() * 3, 0.0);

    Perceiver perfect;
    perfect.kind = Perceiver::Kind::perfect;
    Rng rng(seed);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto encounter = sample_encounter(rng.next_u64());
        const auto sim = simulate(encounter, policy, perfect, nullptr, config, rng.next_u64());
        for (const auto& state : sim.states) {
            const auto it =
                std::lower_bound(hdot_axis.begin(), hdot_axis.end(), state.hdot);
            std::size_t idx;
            if (it == hdot_axis.begin()) {
                idx = 0;
            } else if (it == hdot_axis.end()) {
                idx = hdot_axis.size() - 1;
            } else {
                const std::size_t hi = static_cast<std::size_t>(it - hdot_axis.begin());
                idx = (state.hdot - hdot_axis[hi - 1] <= hdot_axis[hi] - state.hdot) ? hi - 1 : hi;
            }
            weights.w[idx * 3 + static_cast<std::size_t>(state.a_prev)] += 1.0;
            total += 1.0;
        }
    }
    for (double& w : weights.w) w /= total;
    return weights;
}

namespace {

double mean_of(const std::vector<int>& v) {
    double acc = 0.0;
    for (int x : v) acc += x;
    return acc / static_cast<double>(v.size());
}

double std_error_of(const std::vector<int>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = mean_of(v);
    double var = 0.0;
    for (int x : v) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(v.size() - 1)) /
           std::sqrt(static_cast<double>(v.size()));
}

}  // namespace

std::vector<PerceiverReport> evaluate_suite(const daa::DaaPolicy& policy,
                                            const std::vector<Perceiver>& perceivers,
                                            const RiskTable& marginal, const SuiteConfig& config,
                                            std::uint64_t seed) {
    // Clear-weather validation set shared by every perceiver; detector
    // operating thresholds are calibrated on it at a fixed false-positive
    // budget.
    daa::DetectorDatasetConfig val_config;
    val_config.kind = daa::DetectorDataKind::uniform;
    val_config.n = config.validation_images;
    val_config.fixed_visibility = 1.0;
    val_config.render = config.render;
    const auto validation = generate_detector_dataset(val_config, marginal, seed ^ 0x7a11dull);

    std::vector<PerceiverReport> reports;
    for (const auto& given : perceivers) {
        Perceiver perceiver = given;
        if (perceiver.kind == Perceiver::Kind::detector) {
            perceiver.threshold = daa::calibrate_threshold(*perceiver.net, validation);
        }
        PerceiverReport report;
        report.name = perceiver.name();
        report.threshold = perceiver.threshold;
        for (int trial = 0; trial < config.trials; ++trial) {
            Rng trial_rng = Rng(seed).split(0x100 + static_cast<std::uint64_t>(trial));
            std::vector<std::uint64_t> enc_seeds(config.n_encounters);
            std::vector<std::uint64_t> sim_seeds(config.n_encounters);
            for (std::size_t i = 0; i < config.n_encounters; ++i) {
                enc_seeds[i] = trial_rng.next_u64();
                sim_seeds[i] = trial_rng.next_u64();
            }
            std::vector<char> nmac(config.n_encounters, 0);
            std::vector<std::vector<double>> risks(config.n_encounters);
            const int jobs = std::max(1, config.jobs);
            std::atomic<std::size_t> cursor{0};
            auto worker = [&] {
                std::size_t i;
                while ((i = cursor.fetch_add(1)) < config.n_encounters) {
                    const auto encounter = sample_encounter(enc_seeds[i]);
                    const auto sim = simulate(encounter, policy, perceiver, &marginal,
                                              config.sim, sim_seeds[i]);
                    nmac[i] = sim.nmac ? 1 : 0;
                    risks[i] = sim.risk;
                }
            };
            if (jobs == 1) {
                worker();
            } else {
                std::vector<std::thread> threads;
                for (int w = 0; w < jobs; ++w) threads.emplace_back(worker);
                for (auto& t : threads) t.join();
            }
            int count = 0;
            for (char flag : nmac) count += flag;
            report.nmac_counts.push_back(count);
            for (const auto& r : risks) {
                report.risk_samples.insert(report.risk_samples.end(), r.begin(), r.end());
            }
        }
        report.nmac_mean = mean_of(report.nmac_counts);
        report.nmac_std_error = std_error_of(report.nmac_counts);

        if (perceiver.kind == Perceiver::Kind::detector) {
            report.pr = daa::evaluate_detector(*perceiver.net, validation, perceiver.threshold);
        } else {
            // Detection sampled directly from the perceiver on the
            // validation states.
            Rng val_rng(seed ^ 0x7a1ull);
            daa::PrecisionRecall pr;
            for (std::size_t i = 0; i < validation.size(); ++i) {
                const bool present = validation.label_row(i)[4] > 0.5;
                const auto state = validation.state_row(i);
                bool detected = false;
                switch (perceiver.kind) {
                    case Perceiver::Kind::perfect: detected = present; break;
                    case Perceiver::Kind::never_detect: detected = false; break;
                    case Perceiver::Kind::detection_model:
                        detected = present &&
                                   val_rng.uniform() <
                                       perceiver.model->probability(state[0], state[1]);
                        break;
                    default: break;
                }
                if (detected && present) ++pr.true_positives;
                if (detected && !present) ++pr.false_positives;
                if (!detected && present) ++pr.false_negatives;
            }
            pr.precision = (pr.true_positives + pr.false_positives) > 0
                               ? static_cast<double>(pr.true_positives) /
                                     (pr.true_positives + pr.false_positives)
                               : 1.0;
            pr.recall = (pr.true_positives + pr.false_negatives) > 0
                            ? static_cast<double>(pr.true_positives) /
                                  (pr.true_positives + pr.false_negatives)
                            : 0.0;
            report.pr = pr;
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

}  // namespace enc
}  // namespace rdp
