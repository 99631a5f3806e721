#pragma once
// Inverted pendulum environment: discrete-time dynamics, the rule-based
// balancing controller, a two-frame grayscale renderer, the notional
// Gaussian error model, and assembly of the abstracted-perception MDP.

#include <cstdint>
#include <vector>

#include "rdp/mdp.hpp"

namespace rdp {
namespace pendulum {

inline constexpr double kQuarterPi = 0.78539816339744830961;

struct PendulumState {
    double theta = 0.0;  // radians from vertical
    double omega = 0.0;  // rad/s
};

struct PendulumParams {
    double gravity = 10.0;
    double length = 1.0;
    double mass = 1.0;
    double dt = 0.05;
    double max_torque = 2.0;
    double max_speed = 8.0;
};

inline bool failed(const PendulumState& s) { return s.theta > kQuarterPi || s.theta < -kQuarterPi; }

// One Euler step; torque is clipped to +-max_torque and the resulting
// angular velocity to +-max_speed.
PendulumState step(const PendulumState& s, double torque, const PendulumParams& params = {});

// Rule-based balancing torque from the perceived state, clipped to
// +-max_torque.
double control(const PendulumState& s_hat, const PendulumParams& params = {});

struct RenderConfig {
    int resolution = 32;
    double noise_sigma = 0.1;
    double rod_halfwidth = 2.0;   // pixels
    double edge_softness = 2.0;   // anti-aliasing ramp width in pixels
    // Exposure smear: each frame sweeps the rod across the angle covered
    // during the exposure window, so angular speed shows up as blur width
    // rather than only as a sub-pixel shift between frames.
    int blur_samples = 7;          // 1 disables the sweep
    double exposure_steps = 8.0;   // exposure window in units of dt
    // Fixed mid-frequency background the rod occludes; nonzero amplitude
    // makes the angle readout locally coded instead of globally smooth.
    double background_amplitude = 0.0;
    double background_period = 4.0;  // pixels
    // Per-observation camera offset, uniform in +-camera_jitter pixels and
    // shared by both frames, so readouts must tolerate translation.
    double camera_jitter = 0.0;
};

struct ObservationFrames {
    int resolution = 0;
    std::vector<double> previous;  // resolution^2 pixels in [0, 1]
    std::vector<double> current;
};

// Two consecutive frames: the rod drawn from the image center at each
// state's angle plus i.i.d. Gaussian pixel noise. Deterministic per seed.
ObservationFrames render(const PendulumState& s, const PendulumState& s_prev,
                         const RenderConfig& config, std::uint64_t seed);

struct ErrorModel {
    Grid atoms;                    // eps_theta x eps_omega grid
    std::vector<double> weights;   // normalized product-Gaussian masses
};

struct ErrorModelConfig {
    double theta_range = 0.4;   // two standard deviations
    double omega_range = 1.0;
    double theta_sigma = 0.2;
    double omega_sigma = 0.5;
    int points_per_axis = 11;
    double min_fraction = 0.05;
};

ErrorModel pendulum_error_model(const ErrorModelConfig& config = {});

struct MdpConfig {
    int grid_points = 41;
    double theta_max = kQuarterPi;
    double omega_max = 2.0;
    int horizon = 20;
    int cost_atoms = 50;
    double grid_min_fraction = 0.05;
    double cost_min_fraction = 1e-3;
    PendulumParams params;
    ErrorModelConfig error_model;
};

struct PendulumProblem {
    AbstractedPerceptionMdp mdp;
    std::vector<double> cost_support;
};

// Time-augmented MDP over a log-spaced (theta, omega) grid; cost is the
// absolute angle at the final step, states beyond |theta| = pi/4 absorb
// with terminal cost pi/4.
PendulumProblem build_pendulum_mdp(const MdpConfig& config = {});

}  // namespace pendulum
}  // namespace rdp
