#include "rdp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rdp {

Grid::Grid(std::vector<std::vector<double>> axes, std::vector<int> discrete_sizes)
    : axes_(std::move(axes)), discrete_sizes_(std::move(discrete_sizes)) {
    for (const auto& axis : axes_) {
        if (axis.size() < 2) {
            throw std::invalid_argument("Grid: continuous axis needs >= 2 points");
        }
        for (std::size_t i = 1; i < axis.size(); ++i) {
            if (!(axis[i - 1] < axis[i])) {
                throw std::invalid_argument("Grid: axis must be strictly increasing");
            }
        }
    }
    for (int size : discrete_sizes_) {
        if (size < 1) throw std::invalid_argument("Grid: discrete axis needs >= 1 labels");
    }
    const std::size_t total_axes = axes_.size() + discrete_sizes_.size();
    strides_.assign(total_axes, 1);
    num_cells_ = 1;
    for (std::size_t i = total_axes; i-- > 0;) {
        strides_[i] = num_cells_;
        const std::size_t extent = i < axes_.size()
                                       ? axes_[i].size()
                                       : static_cast<std::size_t>(discrete_sizes_[i - axes_.size()]);
        num_cells_ *= extent;
    }
}

std::size_t Grid::cell_index(std::span<const int> cont_idx, std::span<const int> disc_idx) const {
    std::size_t cell = 0;
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        cell += static_cast<std::size_t>(cont_idx[i]) * strides_[i];
    }
    for (std::size_t i = 0; i < discrete_sizes_.size(); ++i) {
        cell += static_cast<std::size_t>(disc_idx[i]) * strides_[axes_.size() + i];
    }
    return cell;
}

void Grid::cell_coords(std::size_t cell, std::span<int> cont_idx, std::span<int> disc_idx) const {
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        cont_idx[i] = static_cast<int>(cell / strides_[i]);
        cell %= strides_[i];
    }
    for (std::size_t i = 0; i < discrete_sizes_.size(); ++i) {
        disc_idx[i] = static_cast<int>(cell / strides_[axes_.size() + i]);
        cell %= strides_[axes_.size() + i];
    }
}

void Grid::cell_point(std::size_t cell, std::span<double> x, std::span<int> disc_idx) const {
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        const std::size_t idx = cell / strides_[i];
        cell %= strides_[i];
        x[i] = axes_[i][idx];
    }
    for (std::size_t i = 0; i < discrete_sizes_.size(); ++i) {
        disc_idx[i] = static_cast<int>(cell / strides_[axes_.size() + i]);
        cell %= strides_[axes_.size() + i];
    }
}

void Grid::axis_weights(std::span<const double> x, std::span<AxisWeight> out) const {
    for (std::size_t i = 0; i < axes_.size(); ++i) {
        const auto& axis = axes_[i];
        const double v = std::clamp(x[i], axis.front(), axis.back());
        auto it = std::upper_bound(axis.begin(), axis.end(), v);
        std::size_t hi = static_cast<std::size_t>(it - axis.begin());
        if (hi == 0) hi = 1;
        if (hi == axis.size()) hi = axis.size() - 1;
        const std::size_t lo = hi - 1;
        out[i].lo = static_cast<int>(lo);
        out[i].w_lo = (axis[hi] - v) / (axis[hi] - axis[lo]);
    }
}

void Grid::interp_cells(std::span<const double> x, std::span<const int> disc_idx,
                        std::vector<std::pair<std::size_t, double>>& out) const {
    const std::size_t n_axes = axes_.size();
    AxisWeight weights[8];
    if (n_axes > 8) throw std::invalid_argument("Grid: interpolation limited to 8 axes");
    axis_weights(x, std::span<AxisWeight>(weights, n_axes));

    std::size_t base = 0;
    for (std::size_t i = 0; i < discrete_sizes_.size(); ++i) {
        base += static_cast<std::size_t>(disc_idx[i]) * strides_[n_axes + i];
    }
    const std::size_t corners = std::size_t{1} << n_axes;
    for (std::size_t mask = 0; mask < corners; ++mask) {
        double w = 1.0;
        std::size_t cell = base;
        for (std::size_t i = 0; i < n_axes; ++i) {
            const bool hi = (mask >> i) & 1u;
            w *= hi ? (1.0 - weights[i].w_lo) : weights[i].w_lo;
            cell += (static_cast<std::size_t>(weights[i].lo) + (hi ? 1 : 0)) * strides_[i];
        }
        if (w > 0.0) out.emplace_back(cell, w);
    }
}

std::vector<double> uniform_axis(double lo, double hi, int n) {
    if (n < 2 || !(lo < hi)) throw std::invalid_argument("uniform_axis: bad range");
    std::vector<double> axis(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        axis[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    }
    return axis;
}

std::vector<double> log_symmetric_axis(double max_abs, int n, double min_fraction) {
    if (n < 3 || n % 2 == 0) throw std::invalid_argument("log_symmetric_axis: n must be odd >= 3");
    if (!(max_abs > 0.0) || !(min_fraction > 0.0) || !(min_fraction < 1.0)) {
        throw std::invalid_argument("log_symmetric_axis: bad parameters");
    }
    const int half = (n - 1) / 2;
    std::vector<double> mags(static_cast<std::size_t>(half));
    for (int i = 0; i < half; ++i) {
        const double frac = half == 1 ? 1.0
                                      : std::pow(min_fraction, static_cast<double>(half - 1 - i) /
                                                                   static_cast<double>(half - 1));
        mags[static_cast<std::size_t>(i)] = max_abs * frac;
    }
    std::vector<double> axis;
    axis.reserve(static_cast<std::size_t>(n));
    for (int i = half - 1; i >= 0; --i) axis.push_back(-mags[static_cast<std::size_t>(i)]);
    axis.push_back(0.0);
    for (int i = 0; i < half; ++i) axis.push_back(mags[static_cast<std::size_t>(i)]);
    return axis;
}

std::vector<double> log_cost_support(double max, int n, double min_fraction) {
    if (n < 2) throw std::invalid_argument("log_cost_support: n must be >= 2");
    if (!(max > 0.0) || !(min_fraction > 0.0) || !(min_fraction < 1.0)) {
        throw std::invalid_argument("log_cost_support: bad parameters");
    }
    std::vector<double> support;
    support.reserve(static_cast<std::size_t>(n));
    support.push_back(0.0);
    const int m = n - 1;
    for (int i = 0; i < m; ++i) {
        const double frac = m == 1 ? 1.0
                                   : std::pow(min_fraction, static_cast<double>(m - 1 - i) /
                                                                static_cast<double>(m - 1));
        support.push_back(max * frac);
    }
    return support;
}

}  // namespace rdp
