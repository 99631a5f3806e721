#pragma once
// Categorical distributions over scalar costs and the VaR/CVaR risk
// measures computed from them. All risk queries in the library bottom out
// in the span-based kernels here so that table storage can stay as raw
// probability rows sharing one support.

#include <span>
#include <utility>
#include <vector>

namespace rdp {

// Risk level alpha in [0, 1). alpha = 1 is represented by worst_case().
class RiskLevel {
public:
    RiskLevel(double alpha);  // NOLINT: implicit by design, reads naturally at call sites
    double alpha() const { return alpha_; }

private:
    double alpha_;
};

// Probability mass on a strictly increasing set of scalar atoms.
// Immutable after construction; the constructor renormalizes mass drift
// below 1e-6 and rejects anything worse.
class CategoricalDistribution {
public:
    CategoricalDistribution(std::vector<double> support, std::vector<double> probs);

    static CategoricalDistribution point_mass(double value);

    const std::vector<double>& support() const { return support_; }
    const std::vector<double>& probs() const { return probs_; }
    std::size_t size() const { return support_.size(); }

private:
    std::vector<double> support_;
    std::vector<double> probs_;
};

// Span kernels. Preconditions (not rechecked): support strictly increasing,
// probs non-negative and summing to ~1, equal lengths.
namespace dist {

double mean(std::span<const double> support, std::span<const double> probs);
double var(std::span<const double> support, std::span<const double> probs, double alpha);
double cvar(std::span<const double> support, std::span<const double> probs, double alpha);
double worst_case(std::span<const double> support, std::span<const double> probs);

// Splits (value, weight) samples onto the two bracketing target atoms in
// proportion to linear distance; out-of-range values clamp to the end
// atoms. `out` must have target.size() entries and is accumulated into.
void project_into(std::span<const double> target, double value, double weight,
                  std::span<double> out);

}  // namespace dist

double mean(const CategoricalDistribution& d);
double var(const CategoricalDistribution& d, RiskLevel alpha);
double cvar(const CategoricalDistribution& d, RiskLevel alpha);
double worst_case(const CategoricalDistribution& d);

// Categorical projection of weighted samples onto a fixed support.
// Throws std::invalid_argument on an empty sample list.
CategoricalDistribution project(std::span<const double> target_support,
                                std::span<const std::pair<double, double>> samples);

}  // namespace rdp
