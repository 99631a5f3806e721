#include "rdp/daa.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rdp {
namespace daa {

DaaState daa_step(const DaaState& s, Advisory u, double w, const DynamicsConfig& config) {
    if (s.tau < 1) throw std::invalid_argument("daa_step: tau must be >= 1");
    DaaState next = s;
    next.h = s.h + s.hdot;
    double delta = 0.0;
    if (u != Advisory::coc) {
        delta = std::clamp(commanded_rate(u) - s.hdot, -config.max_accel, config.max_accel);
    }
    next.hdot = std::clamp(s.hdot + delta + w, -config.hdot_limit, config.hdot_limit);
    next.a_prev = u;
    next.tau = s.tau - 1;
    return next;
}

DaaPolicy::DaaPolicy(GridConfig grid_config, std::vector<std::uint8_t> actions)
    : grid_config_(grid_config),
      h_axis_(log_symmetric_axis(grid_config.h_max, grid_config.h_points,
                                 grid_config.min_fraction)),
      hdot_axis_(log_symmetric_axis(grid_config.hdot_max, grid_config.hdot_points,
                                    grid_config.min_fraction)),
      actions_(std::move(actions)) {
    const std::size_t expected = static_cast<std::size_t>(grid_config_.tau_max + 1) *
                                 h_axis_.size() * hdot_axis_.size() * 3;
    if (actions_.size() != expected) {
        throw std::invalid_argument("DaaPolicy: action table size mismatch");
    }
}

std::size_t DaaPolicy::index(int h_idx, int hdot_idx, int a_prev, int tau) const {
    return ((static_cast<std::size_t>(tau) * h_axis_.size() + static_cast<std::size_t>(h_idx)) *
                hdot_axis_.size() +
            static_cast<std::size_t>(hdot_idx)) *
               3 +
           static_cast<std::size_t>(a_prev);
}

Advisory DaaPolicy::at(int h_idx, int hdot_idx, Advisory a_prev, int tau) const {
    return static_cast<Advisory>(
        actions_[index(h_idx, hdot_idx, static_cast<int>(a_prev), tau)]);
}

namespace {

int nearest_index(const std::vector<double>& axis, double v) {
    const auto it = std::lower_bound(axis.begin(), axis.end(), v);
    if (it == axis.begin()) return 0;
    if (it == axis.end()) return static_cast<int>(axis.size()) - 1;
    const std::size_t hi = static_cast<std::size_t>(it - axis.begin());
    return (v - axis[hi - 1] <= axis[hi] - v) ? static_cast<int>(hi - 1) : static_cast<int>(hi);
}

}  // namespace

Advisory DaaPolicy::advisory(const DaaState& s) const {
    if (!s.intruder_present) return Advisory::coc;
    if (s.tau < 0 || s.tau > grid_config_.tau_max) return Advisory::coc;
    const int h_idx = nearest_index(h_axis_, s.h);
    const int hdot_idx = nearest_index(hdot_axis_, s.hdot);
    return at(h_idx, hdot_idx, s.a_prev, s.tau);
}

DaaPolicy solve_controller(const GridConfig& grid, const ControllerCostConfig& costs,
                           const DynamicsConfig& dynamics) {
    const auto h_axis = log_symmetric_axis(grid.h_max, grid.h_points, grid.min_fraction);
    const auto hdot_axis = log_symmetric_axis(grid.hdot_max, grid.hdot_points, grid.min_fraction);
    const std::size_t nh = h_axis.size();
    const std::size_t nd = hdot_axis.size();
    const std::size_t slice = nh * nd * 3;
    const int n_tau = grid.tau_max + 1;

    const Grid value_grid({h_axis, hdot_axis});  // bilinear lookups over (h, hdot)

    std::vector<double> v_prev(slice, 0.0);
    std::vector<double> v_cur(slice, 0.0);
    std::vector<std::uint8_t> actions(static_cast<std::size_t>(n_tau) * slice, 0);

    const auto cell = [&](std::size_t hi, std::size_t di, std::size_t ap) {
        return (hi * nd + di) * 3 + ap;
    };

    // tau = 0: collision cost only.
    for (std::size_t hi = 0; hi < nh; ++hi) {
        const double terminal =
            std::abs(h_axis[hi]) < costs.nmac_threshold ? costs.nmac_cost : 0.0;
        for (std::size_t di = 0; di < nd; ++di) {
            for (std::size_t ap = 0; ap < 3; ++ap) v_prev[cell(hi, di, ap)] = terminal;
        }
    }

    const double noise[3] = {0.0, dynamics.noise_value, -dynamics.noise_value};
    const double noise_p[3] = {1.0 - 2.0 * dynamics.noise_prob, dynamics.noise_prob,
                               dynamics.noise_prob};
    const Advisory order[3] = {Advisory::coc, Advisory::climb, Advisory::descend};

    std::vector<std::pair<std::size_t, double>> cells;
    for (int tau = 1; tau < n_tau; ++tau) {
        for (std::size_t hi = 0; hi < nh; ++hi) {
            for (std::size_t di = 0; di < nd; ++di) {
                for (std::size_t ap = 0; ap < 3; ++ap) {
                    const DaaState s{true, h_axis[hi], hdot_axis[di],
                                     static_cast<Advisory>(ap), tau};
                    const double drift = s.h + s.hdot * tau;
                    const bool drift_resolves =
                        std::abs(drift) >= costs.nmac_threshold + costs.drift_inhibit_buffer;
                    double q_values[3];
                    for (const Advisory u : order) {
                        double q = 0.0;
                        if (u != Advisory::coc) q += costs.alert_cost;
                        if (is_reversal(u, s.a_prev)) q += costs.reversal_cost;
                        for (int wi = 0; wi < 3; ++wi) {
                            if (noise_p[wi] <= 0.0) continue;
                            const DaaState next = daa_step(s, u, noise[wi], dynamics);
                            const double x[2] = {next.h, next.hdot};
                            cells.clear();
                            value_grid.interp_cells(std::span<const double>(x, 2), {}, cells);
                            double ev = 0.0;
                            for (const auto& [c, w] : cells) {
                                ev += w * v_prev[c * 3 + static_cast<std::size_t>(u)];
                            }
                            q += noise_p[wi] * ev;
                        }
                        q_values[static_cast<std::size_t>(u)] = q;
                    }
                    Advisory best_u = Advisory::coc;
                    double best = q_values[0];
                    for (const Advisory u : {Advisory::climb, Advisory::descend}) {
                        if (drift_resolves && commanded_rate(u) * drift < 0.0) continue;
                        const double q = q_values[static_cast<std::size_t>(u)];
                        if (q < q_values[0] - costs.alert_margin && q < best) {
                            best = q;
                            best_u = u;
                        }
                    }
                    v_cur[cell(hi, di, ap)] = best;
                    actions[static_cast<std::size_t>(tau) * slice + cell(hi, di, ap)] =
                        static_cast<std::uint8_t>(best_u);
                }
            }
        }
        std::swap(v_prev, v_cur);
    }
    return DaaPolicy(grid, std::move(actions));
}

namespace {

constexpr char kPolicyMagic[4] = {'R', 'D', 'P', 'P'};
constexpr std::uint32_t kPolicyVersion = 1;

}  // namespace

void save_policy(const DaaPolicy& policy, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_policy: cannot open " + path);
    out.write(kPolicyMagic, 4);
    const std::uint32_t version = kPolicyVersion;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const GridConfig& g = policy.grid_config();
    const std::uint32_t ints[3] = {static_cast<std::uint32_t>(g.h_points),
                                   static_cast<std::uint32_t>(g.hdot_points),
                                   static_cast<std::uint32_t>(g.tau_max)};
    out.write(reinterpret_cast<const char*>(ints), sizeof(ints));
    const double reals[3] = {g.h_max, g.hdot_max, g.min_fraction};
    out.write(reinterpret_cast<const char*>(reals), sizeof(reals));
    out.write(reinterpret_cast<const char*>(policy.raw_actions().data()),
              static_cast<std::streamsize>(policy.raw_actions().size()));
    if (!out) throw std::runtime_error("save_policy: write failed for " + path);
}

DaaPolicy load_policy(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_policy: cannot open " + path);
    char magic[4] = {};
    if (!in.read(magic, 4) || std::memcmp(magic, kPolicyMagic, 4) != 0) {
        throw std::runtime_error("load_policy: not a policy file: " + path);
    }
    std::uint32_t version = 0;
    if (!in.read(reinterpret_cast<char*>(&version), 4) || version != kPolicyVersion) {
        throw std::runtime_error("load_policy: unsupported policy version");
    }
    std::uint32_t ints[3] = {};
    double reals[3] = {};
    if (!in.read(reinterpret_cast<char*>(ints), sizeof(ints)) ||
        !in.read(reinterpret_cast<char*>(reals), sizeof(reals))) {
        throw std::runtime_error("load_policy: truncated header");
    }
    GridConfig g;
    g.h_points = static_cast<int>(ints[0]);
    g.hdot_points = static_cast<int>(ints[1]);
    g.tau_max = static_cast<int>(ints[2]);
    g.h_max = reals[0];
    g.hdot_max = reals[1];
    g.min_fraction = reals[2];
    const std::size_t n_actions = static_cast<std::size_t>(g.tau_max + 1) *
                                  static_cast<std::size_t>(g.h_points) *
                                  static_cast<std::size_t>(g.hdot_points) * 3;
    std::vector<std::uint8_t> actions(n_actions);
    if (!in.read(reinterpret_cast<char*>(actions.data()),
                 static_cast<std::streamsize>(n_actions))) {
        throw std::runtime_error("load_policy: truncated action table");
    }
    char extra = 0;
    if (in.read(&extra, 1)) throw std::runtime_error("load_policy: trailing bytes in " + path);
    return DaaPolicy(g, std::move(actions));
}

}  // namespace daa
}  // namespace rdp
