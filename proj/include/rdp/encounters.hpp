#pragma once
// Straight-line pairwise encounters with the closest point of approach 40 s
// in, closed-loop simulation with perception in the loop, and the safety
// metrics: NMAC counts, logged per-error risks, precision/recall.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rdp/daa.hpp"
#include "rdp/daa_risk.hpp"
#include "rdp/daa_vision.hpp"

namespace rdp {
namespace enc {

struct EncounterFeatures {
    double own_speed = 50.0;       // m/s
    double intruder_speed = 50.0;  // m/s
    double hmd = 50.0;             // horizontal miss distance at CPA (m)
    double vmd = 0.0;              // vertical miss distance at CPA (m)
    double rel_heading_deg = 180.0;
    double visibility = 1.0;       // rendering contrast, fixed per encounter
};

inline constexpr int kEncounterSeconds = 50;
inline constexpr int kCpaSecond = 40;

struct Encounter {
    EncounterFeatures features;
    // Per-second positions, t = 0..50 inclusive; z is altitude.
    std::vector<std::array<double, 3>> ownship;
    std::vector<std::array<double, 3>> intruder;

    double horizontal_separation(int t) const;
};

// Features uniform over the encounter-model ranges; the relative geometry
// places the CPA at t = 40 with separation exactly (hmd, |vmd|). Every
// encounter is an NMAC if no avoidance action is taken.
Encounter sample_encounter(std::uint64_t seed);

// Strict thresholds: vertical < 50 m and horizontal < 100 m simultaneously.
bool is_nmac(double vertical_sep, double horizontal_sep);

struct Perceiver {
    enum class Kind { perfect, never_detect, detection_model, detector };
    Kind kind = Kind::perfect;
    const daa::DetectionModel* model = nullptr;    // detection_model kind
    const nn::DenseNet* net = nullptr;             // detector kind
    daa::RenderConfig render;                      // detector kind
    double threshold = 0.5;
    std::string name() const;
};

struct SimConfig {
    double prealert_hdot_sigma = 0.5;  // noise on the perceived vertical rate before any alert
    double risk_alpha = 0.0;           // level for logged per-error risks
    daa::DynamicsConfig dynamics;
};

struct SimResult {
    std::vector<daa::DaaState> states;  // controller state per second
    std::vector<bool> detected;
    std::vector<daa::Advisory> advisories;
    std::vector<double> own_alt;
    std::vector<double> intruder_alt;
    std::vector<double> risk;  // risk of the realized perception error
    bool nmac = false;
};

// 1 Hz loop: horizontal state read from the encounter, vertical motion on
// the nominal trajectory until the first alert, then integrated with the
// acceleration-limited advisory dynamics. The pre-alert vertical-rate
// noise perturbs the controller's reading, not the flown trajectory, so
// unmitigated encounters keep their constructed miss distances. Risks are
// logged from `marginal` when given, zero otherwise.
SimResult simulate(const Encounter& encounter, const daa::DaaPolicy& policy,
                   const Perceiver& perceiver, const RiskTable* marginal,
                   const SimConfig& config, std::uint64_t seed);

// Occupancy frequencies of (hdot bin, a_prev) over n perfect-perception
// encounter simulations, all timesteps pooled, for table marginalization.
daa::OccupancyWeights occupancy_weights(const daa::DaaPolicy& policy,
                                        const daa::GridConfig& grid, std::size_t n,
                                        std::uint64_t seed, const SimConfig& config = {});

struct PerceiverReport {
    std::string name;
    std::vector<int> nmac_counts;  // per trial
    double nmac_mean = 0.0;
    double nmac_std_error = 0.0;
    std::vector<double> risk_samples;  // pooled logged risks across trials
    daa::PrecisionRecall pr;           // on the clear-weather validation set
    double threshold = 0.5;            // calibrated detector operating point
};

struct SuiteConfig {
    std::size_t n_encounters = 1000;
    int trials = 3;
    std::size_t validation_images = 1000;
    SimConfig sim;
    daa::RenderConfig render;
    int jobs = 1;
};

std::vector<PerceiverReport> evaluate_suite(const daa::DaaPolicy& policy,
                                            const std::vector<Perceiver>& perceivers,
                                            const RiskTable& marginal, const SuiteConfig& config,
                                            std::uint64_t seed);

}  // namespace enc
}  // namespace rdp
