#pragma once
// Solved cost distributions Z(s, eps) on a state grid x error grid, all
// sharing one cost support, plus the CVaR risk queries built on them.
// Tables are immutable after construction and safe to query from many
// threads.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rdp/categorical.hpp"
#include "rdp/grid.hpp"

namespace rdp {

class RiskTable {
public:
    // probs laid out as [state cell][error index][support atom].
    RiskTable(Grid state_grid, Grid error_grid, std::vector<double> cost_support,
              std::vector<double> probs);

    const Grid& state_grid() const { return state_grid_; }
    const Grid& error_grid() const { return error_grid_; }
    const std::vector<double>& cost_support() const { return cost_support_; }
    std::size_t num_errors() const { return error_grid_.num_cells(); }
    const std::vector<double>& raw_probs() const { return probs_; }

    std::span<const double> probs_at(std::size_t cell, std::size_t eps_idx) const;
    CategoricalDistribution dist_at(std::size_t cell, std::size_t eps_idx) const;
    std::vector<double> error_atom(std::size_t eps_idx) const;

    // CVaR of the stored cell distribution, no interpolation.
    double risk_at(std::size_t cell, std::size_t eps_idx, RiskLevel alpha) const;

    // Multilinear interpolation of cvar values over the state grid.
    double risk(std::span<const double> x, std::span<const int> d, std::size_t eps_idx,
                RiskLevel alpha) const;
    // As above, with the error interpolated between atoms as well.
    double risk(std::span<const double> x, std::span<const int> d, std::span<const double> eps,
                RiskLevel alpha) const;

    // Gradient of the interpolated risk surface with respect to the
    // continuous error; zero along axes clamped to the atom hull, and the
    // right-cell subgradient at interior knots.
    std::vector<double> risk_gradient(std::span<const double> x, std::span<const int> d,
                                      std::span<const double> eps, RiskLevel alpha) const;

    // max over error atoms of risk(s, eps) minus risk(s, 0).
    double risk_weight(std::span<const double> x, std::span<const int> d, RiskLevel alpha) const;

    // Convenience overloads for tables without discrete axes.
    double risk(std::span<const double> x, std::size_t eps_idx, RiskLevel alpha) const {
        return risk(x, {}, eps_idx, alpha);
    }
    double risk(std::span<const double> x, std::span<const double> eps, RiskLevel alpha) const {
        return risk(x, std::span<const int>{}, eps, alpha);
    }
    std::vector<double> risk_gradient(std::span<const double> x, std::span<const double> eps,
                                      RiskLevel alpha) const {
        return risk_gradient(x, {}, eps, alpha);
    }
    double risk_weight(std::span<const double> x, RiskLevel alpha) const {
        return risk_weight(x, {}, alpha);
    }

private:
    Grid state_grid_;
    Grid error_grid_;
    std::vector<double> cost_support_;
    std::vector<double> probs_;
};

// Versioned binary container; save -> load -> save is byte-identical.
// Throws std::runtime_error on version mismatch or truncation.
void save_table(const RiskTable& table, const std::string& path);
RiskTable load_table(const std::string& path);

}  // namespace rdp
