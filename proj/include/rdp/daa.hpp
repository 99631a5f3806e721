#pragma once
// Detect-and-avoid collision avoidance controller: vertical-advisory
// dynamics, the controller MDP, and its finite-horizon value-iteration
// solution over a discretized (h, hdot, a_prev, tau) grid.

#include <cstdint>
#include <string>
#include <vector>

#include "rdp/grid.hpp"

namespace rdp {
namespace daa {

enum class Advisory : int { coc = 0, climb = 1, descend = 2 };

inline double commanded_rate(Advisory a) {
    switch (a) {
        case Advisory::climb: return 8.0;
        case Advisory::descend: return -8.0;
        default: return 0.0;
    }
}

inline bool is_reversal(Advisory u, Advisory prev) {
    return (u == Advisory::climb && prev == Advisory::descend) ||
           (u == Advisory::descend && prev == Advisory::climb);
}

struct DaaState {
    bool intruder_present = true;  // p
    double h = 0.0;                // relative altitude, ownship minus intruder (m)
    double hdot = 0.0;             // relative vertical rate (m/s)
    Advisory a_prev = Advisory::coc;
    int tau = 0;                   // seconds to loss of horizontal separation
};

struct DynamicsConfig {
    double max_accel = 3.0;      // m/s^2, vertical
    double hdot_limit = 10.0;    // grid range clamp
    double noise_value = 0.5;    // w = +-noise_value with noise_prob each, else 0
    double noise_prob = 0.1;
};

// One 1 Hz step: h advances with the old rate, then the rate moves toward
// the commanded rate (COC leaves it alone) limited by max_accel, plus
// noise w. Throws std::invalid_argument when tau is already 0.
DaaState daa_step(const DaaState& s, Advisory u, double w, const DynamicsConfig& config = {});

struct GridConfig {
    int h_points = 41;
    double h_max = 300.0;
    int hdot_points = 21;
    double hdot_max = 10.0;
    int tau_max = 41;
    double min_fraction = 0.05;  // log-spacing floor for h and hdot axes
};

// Separation cost cap shared with the perception-risk MDP: cost at tau = 0
// is max(0, kSeparationCostCap - |h|).
inline constexpr double kSeparationCostCap = 150.0;

struct ControllerCostConfig {
    double nmac_cost = 1.0;
    double nmac_threshold = 50.0;  // |h| below this at tau = 0 is a collision
    double alert_cost = 0.005;     // per step for non-COC advisories
    double reversal_cost = 0.01;
    // A non-COC advisory must beat COC by this much. Values above ~0.005
    // suppress marginal alerts but make the alert-region boundary flicker
    // across tau slices; the drift inhibition below handles the harmful
    // cases without that side effect.
    double alert_margin = 0.0;
    // Advisories commanding against the current vertical rate are inhibited
    // whenever |h + hdot * tau| already clears the NMAC threshold by this
    // buffer; reversing an escape that resolves by drift only helps under
    // full follow-through, which missed detections do not guarantee.
    double drift_inhibit_buffer = 5.0;
};

// Greedy advisory table from backward value iteration over tau.
class DaaPolicy {
public:
    DaaPolicy() = default;
    DaaPolicy(GridConfig grid_config, std::vector<std::uint8_t> actions);

    const GridConfig& grid_config() const { return grid_config_; }
    const std::vector<double>& h_axis() const { return h_axis_; }
    const std::vector<double>& hdot_axis() const { return hdot_axis_; }

    Advisory at(int h_idx, int hdot_idx, Advisory a_prev, int tau) const;
    // Nearest-cell lookup; COC when no intruder or tau outside [0, tau_max].
    Advisory advisory(const DaaState& s) const;
    const std::vector<std::uint8_t>& raw_actions() const { return actions_; }

private:
    GridConfig grid_config_;
    std::vector<double> h_axis_;
    std::vector<double> hdot_axis_;
    std::vector<std::uint8_t> actions_;  // [tau][h][hdot][a_prev]
    std::size_t index(int h_idx, int hdot_idx, int a_prev, int tau) const;
};

DaaPolicy solve_controller(const GridConfig& grid = {}, const ControllerCostConfig& costs = {},
                           const DynamicsConfig& dynamics = {});

// Versioned binary container; byte-identical re-save.
void save_policy(const DaaPolicy& policy, const std::string& path);
DaaPolicy load_policy(const std::string& path);

}  // namespace daa
}  // namespace rdp
