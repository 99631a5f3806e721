#pragma once
// Rejection sampling of states proportional to the risk weight w_alpha(s),
// with a uniform proposal over the grid ranges. The interpolated weight
// field is bounded above by its largest grid-node value, which serves as
// the acceptance envelope.

#include <cstdint>
#include <vector>

#include "rdp/risk_table.hpp"

namespace rdp {

// n states with density proportional to risk_weight(s, alpha); throws
// std::runtime_error if the weight field is all zero (degenerate) and
// std::invalid_argument for tables with discrete axes.
std::vector<std::vector<double>> rejection_sample_states(const RiskTable& table, RiskLevel alpha,
                                                         std::size_t n, std::uint64_t seed);

}  // namespace rdp
