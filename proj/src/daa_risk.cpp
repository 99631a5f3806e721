#include "rdp/daa_risk.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rdp {
namespace daa {

double DetectionModel::probability(double h, double tau) const {
    const double half_width = fov_slope * (tau + fov_tau_offset);
    if (std::abs(h) > half_width) return 0.0;
    const double range = std::max(1.0, std::hypot(closure_speed * tau, h));
    const double z = inv_range_gain / range - inv_range_bias;
    return max_prob / (1.0 + std::exp(-z));
}

DaaRiskProblem build_daa_risk_mdp(const DaaPolicy& policy, const DetectionModel& model,
                                  const GridConfig& grid, const DynamicsConfig& dynamics) {
    const auto h_axis = log_symmetric_axis(grid.h_max, grid.h_points, grid.min_fraction);
    const auto hdot_axis = log_symmetric_axis(grid.hdot_max, grid.hdot_points, grid.min_fraction);

    DaaRiskProblem problem;
    problem.cost_support = uniform_axis(0.0, kSeparationCostCap, 50);
    problem.mdp.grid = Grid({h_axis, hdot_axis}, {3});
    problem.mdp.errors = Grid({{0.0, 1.0}});
    problem.mdp.horizon = grid.tau_max + 1;
    problem.mdp.discount = 1.0;

    problem.mdp.error_policy = [model](const MdpState& state, std::vector<double>& out) {
        const double p_detect = model.probability(state.x[0], static_cast<double>(state.t));
        out.assign({p_detect, 1.0 - p_detect});
    };

    const double noise[3] = {0.0, dynamics.noise_value, -dynamics.noise_value};
    const double noise_p[3] = {1.0 - 2.0 * dynamics.noise_prob, dynamics.noise_prob,
                               dynamics.noise_prob};
    problem.mdp.transition = [&policy, dynamics, noise, noise_p](
                                 const MdpState& state, int eps_idx,
                                 std::vector<TransitionBranch>& out) {
        const DaaState s{true, state.x[0], state.x[1],
                         static_cast<Advisory>(state.d[0]), state.t};
        const Advisory u = eps_idx == 1 ? Advisory::coc : policy.advisory(s);
        for (int wi = 0; wi < 3; ++wi) {
            if (noise_p[wi] <= 0.0) continue;
            const DaaState next = daa_step(s, u, noise[wi], dynamics);
            TransitionBranch branch;
            branch.prob = noise_p[wi];
            branch.x = {next.h, next.hdot};
            branch.d = {static_cast<int>(u)};
            out.push_back(std::move(branch));
        }
    };

    problem.mdp.cost = [](const MdpState& state, int) {
        return state.t == 0 ? std::max(0.0, kSeparationCostCap - std::abs(state.x[0])) : 0.0;
    };
    return problem;
}

RiskTable marginalize_table(const RiskTable& full, const OccupancyWeights& weights) {
    const Grid& grid = full.state_grid();
    if (grid.num_axes() != 3 || grid.num_discrete() != 1 || grid.discrete_size(0) != 3) {
        throw std::invalid_argument("marginalize_table: expected (h, hdot, tau) x a_prev grid");
    }
    const std::size_t nh = grid.axis(0).size();
    const std::size_t nd = grid.axis(1).size();
    const std::size_t nt = grid.axis(2).size();
    if (weights.hdot_points != nd || weights.w.size() != nd * 3) {
        throw std::invalid_argument("marginalize_table: weight shape mismatch");
    }
    double total = 0.0;
    for (double v : weights.w) total += v;
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("marginalize_table: weights must sum to 1");
    }

    const std::size_t n_err = full.num_errors();
    const std::size_t n_atoms = full.cost_support().size();
    std::vector<double> probs(nh * nt * n_err * n_atoms, 0.0);
    for (std::size_t hi = 0; hi < nh; ++hi) {
        for (std::size_t di = 0; di < nd; ++di) {
            for (std::size_t ti = 0; ti < nt; ++ti) {
                const std::size_t full_cell = ((hi * nd + di) * nt + ti) * 3;
                const std::size_t out_cell = hi * nt + ti;
                for (std::size_t ap = 0; ap < 3; ++ap) {
                    const double w = weights.at(di, ap);
                    if (w == 0.0) continue;
                    for (std::size_t e = 0; e < n_err; ++e) {
                        const auto row = full.probs_at(full_cell + ap, e);
                        double* out =
                            probs.data() + (out_cell * n_err + e) * n_atoms;
                        for (std::size_t k = 0; k < n_atoms; ++k) out[k] += w * row[k];
                    }
                }
            }
        }
    }
    Grid out_grid({grid.axis(0), grid.axis(2)});
    return RiskTable(std::move(out_grid), full.error_grid(), full.cost_support(),
                     std::move(probs));
}

double objectness_risk(const RiskTable& marginal, double h, double tau, double p_hat,
                       RiskLevel alpha) {
    if (p_hat < 0.0 || p_hat > 1.0) {
        throw std::invalid_argument("objectness_risk: p_hat must lie in [0, 1]");
    }
    const double x[2] = {h, tau};
    const double q_detected = marginal.risk(std::span<const double>(x, 2), std::size_t{0}, alpha);
    const double q_missed = marginal.risk(std::span<const double>(x, 2), std::size_t{1}, alpha);
    return p_hat * q_detected + (1.0 - p_hat) * q_missed;
}

double objectness_risk_gradient(const RiskTable& marginal, double h, double tau,
                                RiskLevel alpha) {
    const double x[2] = {h, tau};
    const double q_detected = marginal.risk(std::span<const double>(x, 2), std::size_t{0}, alpha);
    const double q_missed = marginal.risk(std::span<const double>(x, 2), std::size_t{1}, alpha);
    return q_detected - q_missed;
}

WeightField daa_risk_weight_field(const RiskTable& marginal, RiskLevel alpha) {
    const Grid& grid = marginal.state_grid();
    if (grid.num_axes() != 2 || grid.num_discrete() != 0) {
        throw std::invalid_argument("daa_risk_weight_field: expected an (h, tau) table");
    }
    WeightField field;
    field.h_values = grid.axis(0);
    field.tau_values = grid.axis(1);
    field.w.resize(grid.num_cells());
    for (std::size_t cell = 0; cell < grid.num_cells(); ++cell) {
        const double detected = marginal.risk_at(cell, 0, alpha);
        const double missed = marginal.risk_at(cell, 1, alpha);
        field.w[cell] = std::max(detected, missed) - detected;
    }
    return field;
}

}  // namespace daa
}  // namespace rdp
