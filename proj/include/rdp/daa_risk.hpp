#pragma once
// DAA perception-risk machinery: the notional detection error model, the
// abstracted-perception MDP over detected/missed errors, marginalization
// of the solved table over (hdot, a_prev), the objectness-interpolated
// risk, and the (h, tau) weighting field.

#include <vector>

#include "rdp/daa.hpp"
#include "rdp/mdp.hpp"
#include "rdp/risk_table.hpp"

namespace rdp {
namespace daa {

// Probability of detecting the intruder given |h| and tau: zero outside
// the field-of-view cone, logistic in inverse slant range inside it, so
// detection improves as the intruder closes. Any (|h|, tau) -> [0, 1]
// function can stand in for it downstream.
struct DetectionModel {
    double fov_slope = 35.0;       // cone half-width in h per second of tau
    double fov_tau_offset = 0.5;
    double closure_speed = 100.0;  // nominal closing speed for slant range
    double inv_range_gain = 2000.0;
    double inv_range_bias = 1.0;
    double max_prob = 0.98;

    double probability(double h, double tau) const;
};

struct DaaRiskProblem {
    AbstractedPerceptionMdp mdp;  // grid (h, hdot) + discrete a_prev; horizon tau_max + 1
    std::vector<double> cost_support;
};

// Errors: 0 = detected (controller follows the policy), 1 = missed (COC).
// Cost is 150 - |h| at tau = 0. Solve with all slices kept so tau becomes
// the last continuous axis of the table.
DaaRiskProblem build_daa_risk_mdp(const DaaPolicy& policy, const DetectionModel& model,
                                  const GridConfig& grid = {},
                                  const DynamicsConfig& dynamics = {});

// Occupancy frequencies over (hdot index, a_prev), e.g. from simulations
// of the controller under perfect perception.
struct OccupancyWeights {
    std::vector<double> w;  // [hdot_idx][a_prev], sums to 1
    std::size_t hdot_points = 0;

    double at(std::size_t hdot_idx, std::size_t a_prev) const {
        return w[hdot_idx * 3 + a_prev];
    }
};

// Collapse the full table Z(h, hdot, tau, a_prev, eps) to Zbar(h, tau, eps)
// under the occupancy weights. Axis order of the result: (h, tau).
RiskTable marginalize_table(const RiskTable& full, const OccupancyWeights& weights);

// Eq-style interpolation between the risks of detecting and missing:
// p_hat * Q(s, detected) + (1 - p_hat) * Q(s, missed), on the
// marginalized (h, tau) table.
double objectness_risk(const RiskTable& marginal, double h, double tau, double p_hat,
                       RiskLevel alpha);
// d(objectness_risk)/d(p_hat); constant in p_hat.
double objectness_risk_gradient(const RiskTable& marginal, double h, double tau, RiskLevel alpha);

struct WeightField {
    std::vector<double> h_values;
    std::vector<double> tau_values;
    std::vector<double> w;  // [h][tau]

    double at(std::size_t h_idx, std::size_t tau_idx) const {
        return w[h_idx * tau_values.size() + tau_idx];
    }
};

// w(h, tau) = max over the error set of risk(eps) minus risk(detected),
// at every grid node of the marginalized table. With errors {detected,
// missed} this is max(0, risk(missed) - risk(detected)); the max keeps the
// field non-negative at the rare cells where a brake advisory taken on a
// detection is graded-worse than coasting when later detections miss.
WeightField daa_risk_weight_field(const RiskTable& marginal, RiskLevel alpha);

}  // namespace daa
}  // namespace rdp
