#pragma once
// Rectangular grids mixing continuous axes (strictly increasing coordinate
// arrays, >= 2 points) and finite discrete axes. Cells are flattened
// row-major with continuous indices first, discrete indices last.
// Continuous queries clamp to the axis range before interpolating.

#include <cstddef>
#include <span>
#include <vector>

namespace rdp {

class Grid {
public:
    Grid() = default;
    Grid(std::vector<std::vector<double>> axes, std::vector<int> discrete_sizes = {});

    std::size_t num_axes() const { return axes_.size(); }
    std::size_t num_discrete() const { return discrete_sizes_.size(); }
    const std::vector<double>& axis(std::size_t i) const { return axes_[i]; }
    const std::vector<std::vector<double>>& axes() const { return axes_; }
    int discrete_size(std::size_t i) const { return discrete_sizes_[i]; }
    const std::vector<int>& discrete_sizes() const { return discrete_sizes_; }
    std::size_t num_cells() const { return num_cells_; }

    std::size_t cell_index(std::span<const int> cont_idx, std::span<const int> disc_idx) const;
    void cell_coords(std::size_t cell, std::span<int> cont_idx, std::span<int> disc_idx) const;
    // Coordinate values of a cell's continuous part.
    void cell_point(std::size_t cell, std::span<double> x, std::span<int> disc_idx) const;

    // One axis' contribution to multilinear interpolation: the lower
    // neighbor index and its weight (upper neighbor is lo + 1).
    struct AxisWeight {
        int lo = 0;
        double w_lo = 1.0;
    };
    void axis_weights(std::span<const double> x, std::span<AxisWeight> out) const;

    // Multilinear cell expansion at fixed discrete coordinates: up to 2^A
    // (cell, weight) pairs appended to `out`.
    void interp_cells(std::span<const double> x, std::span<const int> disc_idx,
                      std::vector<std::pair<std::size_t, double>>& out) const;

    double axis_min(std::size_t i) const { return axes_[i].front(); }
    double axis_max(std::size_t i) const { return axes_[i].back(); }

private:
    std::vector<std::vector<double>> axes_;
    std::vector<int> discrete_sizes_;
    std::vector<std::size_t> strides_;  // continuous axes then discrete axes
    std::size_t num_cells_ = 0;
};

// Axis builders.

// n evenly spaced points over [lo, hi].
std::vector<double> uniform_axis(double lo, double hi, int n);

// Symmetric axis on [-max_abs, max_abs] with a geometric progression of
// magnitudes on each side of an exact zero point; n must be odd. The
// smallest nonzero magnitude is min_fraction * max_abs.
std::vector<double> log_symmetric_axis(double max_abs, int n, double min_fraction = 0.05);

// {0} followed by a geometric progression from min_fraction * max up to
// max; n total points. Used for cost supports concentrated near zero.
std::vector<double> log_cost_support(double max, int n, double min_fraction = 1e-3);

}  // namespace rdp
