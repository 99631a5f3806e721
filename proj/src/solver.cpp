#include "rdp/solver.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace rdp {

namespace {

constexpr double kMassTolerance = 1e-9;

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t, std::size_t, int)>& body) {
    if (jobs <= 1 || n < 2) {
        body(0, n, 0);
        return;
    }
    const int workers = std::min<int>(jobs, static_cast<int>(n));
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::size_t begin = static_cast<std::size_t>(w) * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&body, begin, end, w] { body(begin, end, w); });
    }
    for (auto& t : threads) t.join();
}

// Projection of (value, weight) onto the support, walking a cursor that
// only moves right; callers feed values in non-decreasing order.
struct ProjectionCursor {
    std::span<const double> support;
    std::size_t hi = 1;

    void add(double value, double weight, std::span<double> out) {
        const std::size_t n = support.size();
        if (value <= support.front()) {
            out[0] += weight;
            return;
        }
        if (value >= support.back()) {
            out[n - 1] += weight;
            return;
        }
        while (support[hi] < value) ++hi;
        const std::size_t lo = hi - 1;
        const double w_hi = (value - support[lo]) / (support[hi] - support[lo]);
        out[lo] += weight * (1.0 - w_hi);
        out[hi] += weight * w_hi;
    }
};

struct WorkerBuffers {
    MdpState state;
    std::vector<TransitionBranch> branches;
    std::vector<std::pair<std::size_t, double>> cells;
    std::vector<double> mix;
    std::vector<double> error_weights;
    std::size_t clamped_samples = 0;
    double clamped_mass = 0.0;
};

}  // namespace

RiskTable solve(const AbstractedPerceptionMdp& mdp, std::vector<double> cost_support,
                const SolveOptions& options, SolveReport* report) {
    const auto t_start = std::chrono::steady_clock::now();

    if (mdp.horizon < 1) throw std::invalid_argument("solve: horizon must be >= 1");
    if (!mdp.transition || !mdp.cost || !mdp.error_policy) {
        throw std::invalid_argument("solve: mdp callbacks not set");
    }
    if (cost_support.size() < 2) throw std::invalid_argument("solve: cost support too small");
    for (std::size_t i = 1; i < cost_support.size(); ++i) {
        if (!(cost_support[i - 1] < cost_support[i])) {
            throw std::invalid_argument("solve: cost support must be strictly increasing");
        }
    }

    const std::size_t n_cells = mdp.grid.num_cells();
    const std::size_t n_errors = mdp.num_errors();
    const std::size_t n_atoms = cost_support.size();
    const std::size_t row_len = n_atoms;
    const double support_lo = cost_support.front();
    const double support_hi = cost_support.back();
    const double clamp_tol = 1e-9 * (support_hi - support_lo);
    const double gamma = mdp.discount;

    std::vector<double> z_cur(n_cells * n_errors * row_len, 0.0);
    std::vector<double> zbar_prev(n_cells * row_len, 0.0);
    std::vector<double> zbar_cur(n_cells * row_len, 0.0);

    const bool keep_all = options.keep == SolveOptions::Keep::all_slices;
    std::vector<double> out_probs;
    std::size_t cont_cells = 1;
    for (std::size_t i = 0; i < mdp.grid.num_axes(); ++i) cont_cells *= mdp.grid.axis(i).size();
    const std::size_t disc_block = n_cells / cont_cells;  // product of discrete sizes
    if (keep_all) {
        out_probs.assign(n_cells * static_cast<std::size_t>(mdp.horizon) * n_errors * row_len, 0.0);
    }

    const auto store_slice = [&](int t) {
        if (!keep_all) return;
        const std::size_t T = static_cast<std::size_t>(mdp.horizon);
        const std::size_t block = n_errors * row_len;
        for (std::size_t s = 0; s < n_cells; ++s) {
            const std::size_t s_cont = s / disc_block;
            const std::size_t s_disc = s % disc_block;
            const std::size_t out_cell =
                (s_cont * T + static_cast<std::size_t>(t)) * disc_block + s_disc;
            std::copy(z_cur.begin() + static_cast<std::ptrdiff_t>(s * block),
                      z_cur.begin() + static_cast<std::ptrdiff_t>((s + 1) * block),
                      out_probs.begin() + static_cast<std::ptrdiff_t>(out_cell * block));
        }
    };

    std::vector<WorkerBuffers> workers(static_cast<std::size_t>(std::max(1, options.jobs)));
    for (auto& w : workers) {
        w.state.x.resize(mdp.grid.num_axes());
        w.state.d.resize(mdp.grid.num_discrete());
        w.mix.resize(row_len);
    }

    const auto load_state = [&](WorkerBuffers& w, std::size_t cell, int t) {
        mdp.grid.cell_point(cell, w.state.x, w.state.d);
        w.state.t = t;
    };

    const auto finish_row = [&](std::span<double> row) {
        double total = 0.0;
        for (double v : row) total += v;
        if (std::abs(total - 1.0) > 1e-6) {
            throw std::runtime_error("solve: non-normalized transition or error policy (row mass " +
                                     std::to_string(total) + ")");
        }
        if (std::abs(total - 1.0) > kMassTolerance) {
            for (double& v : row) v /= total;
        }
    };

    const auto sweep_slice = [&](int t) {
        parallel_for(n_cells, options.jobs, [&](std::size_t begin, std::size_t end, int worker) {
            WorkerBuffers& w = workers[static_cast<std::size_t>(worker)];
            for (std::size_t cell = begin; cell < end; ++cell) {
                load_state(w, cell, t);
                for (std::size_t e = 0; e < n_errors; ++e) {
                    std::span<double> row(z_cur.data() + (cell * n_errors + e) * row_len, row_len);
                    std::fill(row.begin(), row.end(), 0.0);
                    const double c = mdp.cost(w.state, static_cast<int>(e));

                    if (t == 0) {
                        if (c < support_lo - clamp_tol || c > support_hi + clamp_tol) {
                            ++w.clamped_samples;
                            w.clamped_mass += 1.0;
                        }
                        ProjectionCursor cursor{cost_support};
                        cursor.add(c, 1.0, row);
                        continue;
                    }

                    w.branches.clear();
                    mdp.transition(w.state, static_cast<int>(e), w.branches);
                    std::fill(w.mix.begin(), w.mix.end(), 0.0);
                    double branch_mass = 0.0;
                    double terminal_mass = 0.0;

                    ProjectionCursor cursor{cost_support};
                    for (const auto& branch : w.branches) {
                        branch_mass += branch.prob;
                        if (branch.terminal) {
                            terminal_mass += branch.prob;
                            continue;
                        }
                        w.cells.clear();
                        mdp.grid.interp_cells(branch.x, branch.d, w.cells);
                        for (const auto& [next_cell, weight] : w.cells) {
                            const double p = branch.prob * weight;
                            const double* src = zbar_prev.data() + next_cell * row_len;
                            for (std::size_t k = 0; k < row_len; ++k) w.mix[k] += p * src[k];
                        }
                    }
                    if (std::abs(branch_mass - 1.0) > 1e-6) {
                        throw std::runtime_error("solve: transition probabilities sum to " +
                                                 std::to_string(branch_mass));
                    }

                    for (std::size_t k = 0; k < row_len; ++k) {
                        const double weight = w.mix[k];
                        if (weight == 0.0) continue;
                        const double value = c + gamma * cost_support[k];
                        if (value < support_lo - clamp_tol || value > support_hi + clamp_tol) {
                            ++w.clamped_samples;
                            w.clamped_mass += weight;
                        }
                        cursor.add(value, weight, row);
                    }
                    if (terminal_mass > 0.0) {
                        for (const auto& branch : w.branches) {
                            if (!branch.terminal) continue;
                            const double value = c + gamma * branch.value;
                            if (value < support_lo - clamp_tol || value > support_hi + clamp_tol) {
                                ++w.clamped_samples;
                                w.clamped_mass += branch.prob;
                            }
                            ProjectionCursor term_cursor{cost_support};
                            term_cursor.add(value, branch.prob, row);
                        }
                    }
                    finish_row(row);
                }

                // pi_e mixture of this cell's distributions, consumed by the
                // next (earlier-time) sweep.
                w.error_weights.clear();
                mdp.error_policy(w.state, w.error_weights);
                if (w.error_weights.size() != n_errors) {
                    throw std::runtime_error("solve: error policy returned wrong atom count");
                }
                double policy_mass = 0.0;
                for (double p : w.error_weights) policy_mass += p;
                if (std::abs(policy_mass - 1.0) > 1e-6) {
                    throw std::runtime_error("solve: error policy mass " +
                                             std::to_string(policy_mass));
                }
                double* bar = zbar_cur.data() + cell * row_len;
                std::fill(bar, bar + row_len, 0.0);
                for (std::size_t e = 0; e < n_errors; ++e) {
                    const double p = w.error_weights[e] / policy_mass;
                    const double* src = z_cur.data() + (cell * n_errors + e) * row_len;
                    for (std::size_t k = 0; k < row_len; ++k) bar[k] += p * src[k];
                }
            }
        });
    };

    for (int t = 0; t < mdp.horizon; ++t) {
        sweep_slice(t);
        store_slice(t);
        std::swap(zbar_prev, zbar_cur);
    }

    if (report) {
        report->clamped_samples = 0;
        report->clamped_mass = 0.0;
        for (const auto& w : workers) {
            report->clamped_samples += w.clamped_samples;
            report->clamped_mass += w.clamped_mass;
        }
        report->wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    }

    if (keep_all) {
        std::vector<double> time_values = options.time_axis_values;
        if (time_values.empty()) {
            time_values.resize(static_cast<std::size_t>(mdp.horizon));
            for (int t = 0; t < mdp.horizon; ++t) time_values[static_cast<std::size_t>(t)] = t;
        }
        if (time_values.size() != static_cast<std::size_t>(mdp.horizon)) {
            throw std::invalid_argument("solve: time axis values must match horizon");
        }
        std::vector<std::vector<double>> axes = mdp.grid.axes();
        axes.push_back(std::move(time_values));
        Grid out_grid(std::move(axes), mdp.grid.discrete_sizes());
        return RiskTable(std::move(out_grid), mdp.errors, std::move(cost_support),
                         std::move(out_probs));
    }
    return RiskTable(mdp.grid, mdp.errors, std::move(cost_support), std::move(z_cur));
}

}  // namespace rdp
