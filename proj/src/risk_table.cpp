#include "rdp/risk_table.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rdp {

RiskTable::RiskTable(Grid state_grid, Grid error_grid, std::vector<double> cost_support,
                     std::vector<double> probs)
    : state_grid_(std::move(state_grid)),
      error_grid_(std::move(error_grid)),
      cost_support_(std::move(cost_support)),
      probs_(std::move(probs)) {
    if (cost_support_.size() < 2) {
        throw std::invalid_argument("RiskTable: cost support needs >= 2 atoms");
    }
    for (std::size_t i = 1; i < cost_support_.size(); ++i) {
        if (!(cost_support_[i - 1] < cost_support_[i])) {
            throw std::invalid_argument("RiskTable: cost support must be strictly increasing");
        }
    }
    const std::size_t expected =
        state_grid_.num_cells() * error_grid_.num_cells() * cost_support_.size();
    if (probs_.size() != expected) {
        throw std::invalid_argument("RiskTable: probability array size mismatch");
    }
}

std::span<const double> RiskTable::probs_at(std::size_t cell, std::size_t eps_idx) const {
    const std::size_t k = cost_support_.size();
    const std::size_t offset = (cell * num_errors() + eps_idx) * k;
    return {probs_.data() + offset, k};
}

CategoricalDistribution RiskTable::dist_at(std::size_t cell, std::size_t eps_idx) const {
    const auto row = probs_at(cell, eps_idx);
    return CategoricalDistribution(cost_support_,
                                   std::vector<double>(row.begin(), row.end()));
}

std::vector<double> RiskTable::error_atom(std::size_t eps_idx) const {
    std::vector<double> atom(error_grid_.num_axes());
    int none = 0;
    error_grid_.cell_point(eps_idx, atom, std::span<int>(&none, 0));
    return atom;
}

double RiskTable::risk_at(std::size_t cell, std::size_t eps_idx, RiskLevel alpha) const {
    return dist::cvar(cost_support_, probs_at(cell, eps_idx), alpha.alpha());
}

double RiskTable::risk(std::span<const double> x, std::span<const int> d, std::size_t eps_idx,
                       RiskLevel alpha) const {
    if (eps_idx >= num_errors()) throw std::invalid_argument("risk: unknown error atom index");
    std::vector<std::pair<std::size_t, double>> cells;
    state_grid_.interp_cells(x, d, cells);
    double acc = 0.0;
    for (const auto& [cell, w] : cells) acc += w * risk_at(cell, eps_idx, alpha);
    return acc;
}

double RiskTable::risk(std::span<const double> x, std::span<const int> d,
                       std::span<const double> eps, RiskLevel alpha) const {
    if (eps.size() != error_grid_.num_axes()) {
        throw std::invalid_argument("risk: error dimension mismatch");
    }
    std::vector<std::pair<std::size_t, double>> cells;
    state_grid_.interp_cells(x, d, cells);
    std::vector<std::pair<std::size_t, double>> err_cells;
    error_grid_.interp_cells(eps, {}, err_cells);
    double acc = 0.0;
    for (const auto& [cell, w] : cells) {
        for (const auto& [eps_idx, u] : err_cells) {
            acc += w * u * risk_at(cell, eps_idx, alpha);
        }
    }
    return acc;
}

std::vector<double> RiskTable::risk_gradient(std::span<const double> x, std::span<const int> d,
                                             std::span<const double> eps, RiskLevel alpha) const {
    const std::size_t n_err_axes = error_grid_.num_axes();
    if (eps.size() != n_err_axes) {
        throw std::invalid_argument("risk_gradient: error dimension mismatch");
    }
    if (n_err_axes > 8) throw std::invalid_argument("risk_gradient: too many error axes");

    std::vector<std::pair<std::size_t, double>> cells;
    state_grid_.interp_cells(x, d, cells);

    Grid::AxisWeight weights[8];
    error_grid_.axis_weights(eps, std::span<Grid::AxisWeight>(weights, n_err_axes));

    // CVaR at each error-grid corner, averaged over state cells.
    const std::size_t corners = std::size_t{1} << n_err_axes;
    std::vector<double> corner_risk(corners, 0.0);
    for (std::size_t mask = 0; mask < corners; ++mask) {
        int idx[8];
        for (std::size_t a = 0; a < n_err_axes; ++a) {
            idx[a] = weights[a].lo + static_cast<int>((mask >> a) & 1u);
        }
        // Error grid has no discrete axes; flatten manually.
        std::size_t eps_idx = 0;
        for (std::size_t a = 0; a < n_err_axes; ++a) {
            eps_idx = eps_idx * error_grid_.axis(a).size() + static_cast<std::size_t>(idx[a]);
        }
        double v = 0.0;
        for (const auto& [cell, w] : cells) v += w * risk_at(cell, eps_idx, alpha);
        corner_risk[mask] = v;
    }

    std::vector<double> grad(n_err_axes, 0.0);
    for (std::size_t a = 0; a < n_err_axes; ++a) {
        const auto& axis = error_grid_.axis(a);
        if (eps[a] < axis.front() || eps[a] > axis.back()) continue;  // clamped: zero slope
        const double spacing = axis[static_cast<std::size_t>(weights[a].lo) + 1] -
                               axis[static_cast<std::size_t>(weights[a].lo)];
        double acc = 0.0;
        for (std::size_t mask = 0; mask < corners; ++mask) {
            double w = 1.0;
            for (std::size_t b = 0; b < n_err_axes; ++b) {
                if (b == a) continue;
                w *= ((mask >> b) & 1u) ? (1.0 - weights[b].w_lo) : weights[b].w_lo;
            }
            const double sign = ((mask >> a) & 1u) ? 1.0 : -1.0;
            acc += sign * w * corner_risk[mask];
        }
        grad[a] = acc / spacing;
    }
    return grad;
}

double RiskTable::risk_weight(std::span<const double> x, std::span<const int> d,
                              RiskLevel alpha) const {
    std::vector<std::pair<std::size_t, double>> cells;
    state_grid_.interp_cells(x, d, cells);

    double max_risk = -1e300;
    for (std::size_t eps_idx = 0; eps_idx < num_errors(); ++eps_idx) {
        double v = 0.0;
        for (const auto& [cell, w] : cells) v += w * risk_at(cell, eps_idx, alpha);
        if (v > max_risk) max_risk = v;
    }

    std::vector<double> zero(error_grid_.num_axes(), 0.0);
    std::vector<std::pair<std::size_t, double>> err_cells;
    error_grid_.interp_cells(zero, {}, err_cells);
    double zero_risk = 0.0;
    for (const auto& [cell, w] : cells) {
        for (const auto& [eps_idx, u] : err_cells) {
            zero_risk += w * u * risk_at(cell, eps_idx, alpha);
        }
    }
    return max_risk - zero_risk;
}

// ---------------------------------------------------------------------------
// Binary container.
//
// Layout (little-endian):
//   magic "RDPT", version u32
//   n_state_axes u32, n_state_disc u32, n_error_axes u32, n_support u32
//   per state axis:  len u32, doubles
//   per discrete axis: size u32
//   per error axis:  len u32, doubles
//   support doubles
//   probability rows: num_cells * num_errors * n_support doubles
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'R', 'D', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_doubles(std::ostream& out, std::span<const double> v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::uint32_t read_u32(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) {
        throw std::runtime_error(std::string("load_table: truncated file reading ") + what);
    }
    return v;
}

std::vector<double> read_doubles(std::istream& in, std::size_t n, const char* what) {
    std::vector<double> v(n);
    if (!in.read(reinterpret_cast<char*>(v.data()),
                 static_cast<std::streamsize>(n * sizeof(double)))) {
        throw std::runtime_error(std::string("load_table: truncated file reading ") + what);
    }
    return v;
}

}  // namespace

void save_table(const RiskTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_table: cannot open " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    const Grid& sg = table.state_grid();
    const Grid& eg = table.error_grid();
    write_u32(out, static_cast<std::uint32_t>(sg.num_axes()));
    write_u32(out, static_cast<std::uint32_t>(sg.num_discrete()));
    write_u32(out, static_cast<std::uint32_t>(eg.num_axes()));
    write_u32(out, static_cast<std::uint32_t>(table.cost_support().size()));
    for (std::size_t i = 0; i < sg.num_axes(); ++i) {
        write_u32(out, static_cast<std::uint32_t>(sg.axis(i).size()));
        write_doubles(out, sg.axis(i));
    }
    for (std::size_t i = 0; i < sg.num_discrete(); ++i) {
        write_u32(out, static_cast<std::uint32_t>(sg.discrete_size(i)));
    }
    for (std::size_t i = 0; i < eg.num_axes(); ++i) {
        write_u32(out, static_cast<std::uint32_t>(eg.axis(i).size()));
        write_doubles(out, eg.axis(i));
    }
    write_doubles(out, table.cost_support());
    write_doubles(out, table.raw_probs());
    if (!out) throw std::runtime_error("save_table: write failed for " + path);
}

RiskTable load_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_table: cannot open " + path);
    char magic[4] = {};
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("load_table: not a risk-table file: " + path);
    }
    const std::uint32_t version = read_u32(in, "version");
    if (version != kVersion) {
        throw std::runtime_error("load_table: unsupported version " + std::to_string(version));
    }
    const std::uint32_t n_axes = read_u32(in, "axis count");
    const std::uint32_t n_disc = read_u32(in, "discrete axis count");
    const std::uint32_t n_err_axes = read_u32(in, "error axis count");
    const std::uint32_t n_support = read_u32(in, "support size");

    std::vector<std::vector<double>> axes;
    for (std::uint32_t i = 0; i < n_axes; ++i) {
        const std::uint32_t len = read_u32(in, "axis length");
        axes.push_back(read_doubles(in, len, "axis values"));
    }
    std::vector<int> disc;
    for (std::uint32_t i = 0; i < n_disc; ++i) {
        disc.push_back(static_cast<int>(read_u32(in, "discrete size")));
    }
    std::vector<std::vector<double>> err_axes;
    for (std::uint32_t i = 0; i < n_err_axes; ++i) {
        const std::uint32_t len = read_u32(in, "error axis length");
        err_axes.push_back(read_doubles(in, len, "error axis values"));
    }
    auto support = read_doubles(in, n_support, "cost support");

    Grid state_grid(std::move(axes), std::move(disc));
    Grid error_grid(std::move(err_axes));
    const std::size_t n_probs = state_grid.num_cells() * error_grid.num_cells() * n_support;
    auto probs = read_doubles(in, n_probs, "probability rows");

    char extra = 0;
    if (in.read(&extra, 1)) {
        throw std::runtime_error("load_table: trailing bytes in " + path);
    }
    return RiskTable(std::move(state_grid), std::move(error_grid), std::move(support),
                     std::move(probs));
}

}  // namespace rdp
