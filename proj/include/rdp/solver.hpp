#pragma once
// Distributional dynamic programming over an abstracted-perception MDP:
// one backward sweep per time slice, categorical projection onto a fixed
// cost support, multilinear expansion of off-grid next states.

#include <vector>

#include "rdp/mdp.hpp"
#include "rdp/risk_table.hpp"

namespace rdp {

struct SolveOptions {
    enum class Keep {
        top_slice,   // return only the initial-time slice over the spatial grid
        all_slices,  // append time as the last continuous axis of the output grid
    };
    Keep keep = Keep::top_slice;
    // Axis values used for the time axis under all_slices; defaults to
    // 0, 1, ..., horizon-1 (steps remaining).
    std::vector<double> time_axis_values;
    int jobs = 1;
};

struct SolveReport {
    // Projected sample values outside the cost support by more than the
    // clamping tolerance; mass is their total probability weight.
    std::size_t clamped_samples = 0;
    double clamped_mass = 0.0;
    double wall_seconds = 0.0;
};

RiskTable solve(const AbstractedPerceptionMdp& mdp, std::vector<double> cost_support,
                const SolveOptions& options = {}, SolveReport* report = nullptr);

}  // namespace rdp
