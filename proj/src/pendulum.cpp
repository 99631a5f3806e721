#include "rdp/pendulum.hpp"

#include <algorithm>
#include <cmath>

#include "rdp/rng.hpp"

namespace rdp {
namespace pendulum {

PendulumState step(const PendulumState& s, double torque, const PendulumParams& p) {
    const double a = std::clamp(torque, -p.max_torque, p.max_torque);
    PendulumState next;
    next.theta = s.theta + s.omega * p.dt;
    const double gravity_term = -(3.0 * p.gravity / (2.0 * p.length)) * std::sin(s.theta + M_PI);
    const double torque_term = 3.0 * a / (p.mass * p.length * p.length);
    next.omega = s.omega + (gravity_term + torque_term) * p.dt;
    next.omega = std::clamp(next.omega, -p.max_speed, p.max_speed);
    return next;
}

double control(const PendulumState& s_hat, const PendulumParams& p) {
    const double sign = s_hat.theta > 0.0 ? 1.0 : (s_hat.theta < 0.0 ? -1.0 : 0.0);
    const double omega_target = sign * std::sqrt(60.0 * (1.0 - std::cos(s_hat.theta)));
    const double a = -2.0 * s_hat.omega + (s_hat.omega - omega_target);
    return std::clamp(a, -p.max_torque, p.max_torque);
}

namespace {

void draw_rod(std::vector<double>& image, int res, double theta, double halfwidth,
              double softness, double offset_x, double offset_y) {
    const double cx = res / 2.0 + offset_x;
    const double cy = res / 2.0 + offset_y;
    const double rod_len = 0.9 * res / 2.0;
    // Tip of the rod in pixel coordinates; y grows downward, theta = 0 is up.
    const double tx = cx + rod_len * std::sin(theta);
    const double ty = cy - rod_len * std::cos(theta);
    const double dx = tx - cx;
    const double dy = ty - cy;
    const double len2 = dx * dx + dy * dy;
    const double margin = halfwidth + softness + 1.0;
    const int row_lo = std::max(0, static_cast<int>(std::floor(std::min(cy, ty) - margin)));
    const int row_hi = std::min(res - 1, static_cast<int>(std::ceil(std::max(cy, ty) + margin)));
    const int col_lo = std::max(0, static_cast<int>(std::floor(std::min(cx, tx) - margin)));
    const int col_hi = std::min(res - 1, static_cast<int>(std::ceil(std::max(cx, tx) + margin)));
    for (int row = row_lo; row <= row_hi; ++row) {
        for (int col = col_lo; col <= col_hi; ++col) {
            const double px = col + 0.5;
            const double py = row + 0.5;
            double t = ((px - cx) * dx + (py - cy) * dy) / len2;
            t = std::clamp(t, 0.0, 1.0);
            const double qx = cx + t * dx;
            const double qy = cy + t * dy;
            const double dist = std::hypot(px - qx, py - qy);
            const double intensity =
                std::clamp(1.0 - (dist - halfwidth) / softness, 0.0, 1.0);
            if (intensity > 0.0) {
                double& pixel = image[static_cast<std::size_t>(row * res + col)];
                pixel = std::max(pixel, intensity);
            }
        }
    }
}

void add_noise(std::vector<double>& image, double sigma, Rng& rng) {
    if (sigma <= 0.0) return;
    for (double& pixel : image) {
        pixel = std::clamp(pixel + sigma * rng.normal(), 0.0, 1.0);
    }
}

}  // namespace

namespace {

void draw_exposure(std::vector<double>& image, const RenderConfig& config, double theta_from,
                   double theta_to, double offset_x, double offset_y) {
    const int sweep = std::max(1, config.blur_samples);
    std::vector<double> pass(image.size());
    for (int k = 0; k < sweep; ++k) {
        const double frac = sweep == 1 ? 1.0 : static_cast<double>(k) / (sweep - 1);
        // Comet trail: the head of the sweep saturates, the tail fades, so
        // both speed and direction are visible in a single frame.
        const double brightness = sweep == 1 ? 1.0 : 0.35 + 0.65 * frac;
        std::fill(pass.begin(), pass.end(), 0.0);
        draw_rod(pass, config.resolution, theta_from + frac * (theta_to - theta_from),
                 config.rod_halfwidth, config.edge_softness, offset_x, offset_y);
        for (std::size_t i = 0; i < image.size(); ++i) {
            image[i] = std::max(image[i], brightness * pass[i]);
        }
    }
}

}  // namespace

namespace {

void fill_background(std::vector<double>& image, const RenderConfig& config) {
    if (config.background_amplitude <= 0.0) return;
    const int res = config.resolution;
    const double k = 2.0 * M_PI / config.background_period;
    for (int row = 0; row < res; ++row) {
        for (int col = 0; col < res; ++col) {
            const double v = 0.5 * config.background_amplitude *
                             (1.0 + std::sin(k * (col + 0.5)) * std::sin(k * (row + 0.5)));
            image[static_cast<std::size_t>(row * res + col)] = v;
        }
    }
}

}  // namespace

ObservationFrames render(const PendulumState& s, const PendulumState& s_prev,
                         const RenderConfig& config, std::uint64_t seed) {
    ObservationFrames frames;
    frames.resolution = config.resolution;
    const std::size_t n = static_cast<std::size_t>(config.resolution) *
                          static_cast<std::size_t>(config.resolution);
    frames.previous.assign(n, 0.0);
    frames.current.assign(n, 0.0);
    fill_background(frames.previous, config);
    fill_background(frames.current, config);
    Rng rng(seed);
    double offset_x = 0.0;
    double offset_y = 0.0;
    if (config.camera_jitter > 0.0) {
        offset_x = rng.uniform(-config.camera_jitter, config.camera_jitter);
        offset_y = rng.uniform(-config.camera_jitter, config.camera_jitter);
    }
    // Exposure trails end at each frame's angle.
    const double swept = (s.theta - s_prev.theta) * config.exposure_steps;
    draw_exposure(frames.previous, config, s_prev.theta - swept, s_prev.theta, offset_x,
                  offset_y);
    draw_exposure(frames.current, config, s.theta - swept, s.theta, offset_x, offset_y);
    add_noise(frames.previous, config.noise_sigma, rng);
    add_noise(frames.current, config.noise_sigma, rng);
    return frames;
}

ErrorModel pendulum_error_model(const ErrorModelConfig& config) {
    auto theta_axis = log_symmetric_axis(config.theta_range, config.points_per_axis,
                                         config.min_fraction);
    auto omega_axis = log_symmetric_axis(config.omega_range, config.points_per_axis,
                                         config.min_fraction);
    ErrorModel model;
    model.atoms = Grid({theta_axis, omega_axis});
    model.weights.resize(model.atoms.num_cells());
    double total = 0.0;
    std::vector<double> atom(2);
    std::vector<int> none;
    for (std::size_t i = 0; i < model.atoms.num_cells(); ++i) {
        model.atoms.cell_point(i, atom, none);
        const double zt = atom[0] / config.theta_sigma;
        const double zw = atom[1] / config.omega_sigma;
        model.weights[i] = std::exp(-0.5 * (zt * zt + zw * zw));
        total += model.weights[i];
    }
    for (double& w : model.weights) w /= total;
    return model;
}

PendulumProblem build_pendulum_mdp(const MdpConfig& config) {
    auto theta_axis = log_symmetric_axis(config.theta_max, config.grid_points,
                                         config.grid_min_fraction);
    auto omega_axis = log_symmetric_axis(config.omega_max, config.grid_points,
                                         config.grid_min_fraction);
    ErrorModel errors = pendulum_error_model(config.error_model);
    const PendulumParams params = config.params;
    const double theta_max = config.theta_max;

    PendulumProblem problem;
    problem.cost_support = log_cost_support(theta_max, config.cost_atoms,
                                            config.cost_min_fraction);
    problem.mdp.grid = Grid({theta_axis, omega_axis});
    problem.mdp.errors = errors.atoms;
    problem.mdp.horizon = config.horizon;
    problem.mdp.discount = 1.0;

    auto weights = errors.weights;
    problem.mdp.error_policy = [weights](const MdpState&, std::vector<double>& out) {
        out = weights;
    };

    // Flattened error atoms so the transition avoids per-call grid walks.
    std::vector<std::pair<double, double>> atoms(errors.atoms.num_cells());
    {
        std::vector<double> atom(2);
        std::vector<int> none;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            errors.atoms.cell_point(i, atom, none);
            atoms[i] = {atom[0], atom[1]};
        }
    }
    problem.mdp.transition = [params, theta_max, atoms](const MdpState& state, int eps_idx,
                                                        std::vector<TransitionBranch>& out) {
        const auto [eps_theta, eps_omega] = atoms[static_cast<std::size_t>(eps_idx)];
        const PendulumState s{state.x[0], state.x[1]};
        const PendulumState perceived{s.theta + eps_theta, s.omega + eps_omega};
        const PendulumState next = step(s, control(perceived, params), params);
        TransitionBranch branch;
        branch.prob = 1.0;
        if (next.theta > theta_max || next.theta < -theta_max) {
            branch.terminal = true;
            branch.value = theta_max;
        } else {
            branch.x = {next.theta, next.omega};
        }
        out.push_back(std::move(branch));
    };

    problem.mdp.cost = [](const MdpState& state, int) {
        return state.t == 0 ? std::abs(state.x[0]) : 0.0;
    };
    return problem;
}

}  // namespace pendulum
}  // namespace rdp
