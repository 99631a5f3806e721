#include "rdp/sampling.hpp"

#include <stdexcept>

#include "rdp/rng.hpp"

namespace rdp {

std::vector<std::vector<double>> rejection_sample_states(const RiskTable& table, RiskLevel alpha,
                                                         std::size_t n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("rejection_sample_states: n must be >= 1");
    const Grid& grid = table.state_grid();
    if (grid.num_discrete() != 0) {
        throw std::invalid_argument("rejection_sample_states: table must have no discrete axes");
    }
    const std::size_t n_axes = grid.num_axes();

    // Envelope: the interpolated field is a convex combination of node
    // values, so the node maximum bounds it everywhere.
    double w_max = 0.0;
    std::vector<double> node(n_axes);
    std::vector<int> none;
    for (std::size_t cell = 0; cell < grid.num_cells(); ++cell) {
        grid.cell_point(cell, node, none);
        const double w = table.risk_weight(node, alpha);
        if (w > w_max) w_max = w;
    }
    if (!(w_max > 0.0)) {
        throw std::runtime_error("rejection_sample_states: weight field is identically zero");
    }

    Rng rng(seed);
    std::vector<std::vector<double>> samples;
    samples.reserve(n);
    std::vector<double> x(n_axes);
    std::size_t proposals = 0;
    const std::size_t proposal_cap = 1000000 * (n + 100);
    while (samples.size() < n) {
        if (++proposals > proposal_cap) {
            throw std::runtime_error("rejection_sample_states: acceptance rate too low");
        }
        for (std::size_t i = 0; i < n_axes; ++i) {
            x[i] = rng.uniform(grid.axis_min(i), grid.axis_max(i));
        }
        const double w = table.risk_weight(x, alpha);
        if (rng.uniform() * w_max < w) samples.push_back(x);
    }
    return samples;
}

}  // namespace rdp
