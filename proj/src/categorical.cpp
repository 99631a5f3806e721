#include "rdp/categorical.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rdp {

namespace {

constexpr double kMassTolerance = 1e-9;
constexpr double kRenormalizeLimit = 1e-6;
constexpr double kNegativeProbSlack = 1e-12;

}  // namespace

RiskLevel::RiskLevel(double alpha) : alpha_(alpha) {
    if (!(alpha >= 0.0) || !(alpha < 1.0)) {
        throw std::invalid_argument("RiskLevel: alpha must lie in [0, 1), got " +
                                    std::to_string(alpha));
    }
}

CategoricalDistribution::CategoricalDistribution(std::vector<double> support,
                                                 std::vector<double> probs)
    : support_(std::move(support)), probs_(std::move(probs)) {
    if (support_.empty()) {
        throw std::invalid_argument("CategoricalDistribution: empty support");
    }
    if (support_.size() != probs_.size()) {
        throw std::invalid_argument("CategoricalDistribution: support/probs length mismatch");
    }
    for (std::size_t i = 1; i < support_.size(); ++i) {
        if (!(support_[i - 1] < support_[i])) {
            throw std::invalid_argument(
                "CategoricalDistribution: support must be strictly increasing");
        }
    }
    double total = 0.0;
    for (double& p : probs_) {
        if (p < 0.0) {
            if (p < -kNegativeProbSlack) {
                throw std::invalid_argument("CategoricalDistribution: negative probability");
            }
            p = 0.0;  // rounding debris from upstream arithmetic
        }
        total += p;
    }
    if (std::abs(total - 1.0) > kRenormalizeLimit) {
        throw std::invalid_argument("CategoricalDistribution: probabilities sum to " +
                                    std::to_string(total));
    }
    if (std::abs(total - 1.0) > kMassTolerance) {
        for (double& p : probs_) p /= total;
    }
}

CategoricalDistribution CategoricalDistribution::point_mass(double value) {
    return CategoricalDistribution({value}, {1.0});
}

namespace dist {

double mean(std::span<const double> support, std::span<const double> probs) {
    double acc = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) acc += support[i] * probs[i];
    return acc;
}

double var(std::span<const double> support, std::span<const double> probs, double alpha) {
    double cdf = 0.0;
    for (std::size_t i = 0; i < support.size(); ++i) {
        cdf += probs[i];
        // cdf > 0 keeps the quantile on atoms that carry mass, so zero-
        // probability padding below the true minimum cannot move VaR_0.
        if (cdf >= alpha && cdf > 0.0) return support[i];
    }
    return support.back();  // cdf short of 1 by rounding
}

double cvar(std::span<const double> support, std::span<const double> probs, double alpha) {
    // Superquantile with atom splitting: expected value of the worst
    // (1 - alpha) mass, the straddling atom taken fractionally.
    const double tail = 1.0 - alpha;
    double remaining = tail;
    double acc = 0.0;
    for (std::size_t i = support.size(); i-- > 0;) {
        const double take = std::min(remaining, probs[i]);
        acc += take * support[i];
        remaining -= take;
        if (remaining <= 0.0) break;
    }
    if (remaining > 0.0) {
        // Total mass fell short of the requested tail (rounding); pad with
        // the lowest atom so alpha = 0 still reproduces the mean.
        acc += remaining * support.front();
    }
    return acc / tail;
}

double worst_case(std::span<const double> support, std::span<const double> probs) {
    for (std::size_t i = support.size(); i-- > 0;) {
        if (probs[i] > 0.0) return support[i];
    }
    return support.front();
}

void project_into(std::span<const double> target, double value, double weight,
                  std::span<double> out) {
    const std::size_t n = target.size();
    if (value <= target.front()) {
        out[0] += weight;
        return;
    }
    if (value >= target.back()) {
        out[n - 1] += weight;
        return;
    }
    const auto it = std::upper_bound(target.begin(), target.end(), value);
    const std::size_t hi = static_cast<std::size_t>(it - target.begin());
    const std::size_t lo = hi - 1;
    const double span = target[hi] - target[lo];
    const double w_hi = (value - target[lo]) / span;
    out[lo] += weight * (1.0 - w_hi);
    out[hi] += weight * w_hi;
}

}  // namespace dist

double mean(const CategoricalDistribution& d) {
    return dist::mean(d.support(), d.probs());
}

double var(const CategoricalDistribution& d, RiskLevel alpha) {
    return dist::var(d.support(), d.probs(), alpha.alpha());
}

double cvar(const CategoricalDistribution& d, RiskLevel alpha) {
    return dist::cvar(d.support(), d.probs(), alpha.alpha());
}

double worst_case(const CategoricalDistribution& d) {
    return dist::worst_case(d.support(), d.probs());
}

CategoricalDistribution project(std::span<const double> target_support,
                                std::span<const std::pair<double, double>> samples) {
    if (samples.empty()) {
        throw std::invalid_argument("project: empty sample list");
    }
    std::vector<double> probs(target_support.size(), 0.0);
    for (const auto& [value, weight] : samples) {
        if (weight < 0.0) {
            throw std::invalid_argument("project: negative sample weight");
        }
        dist::project_into(target_support, value, weight, probs);
    }
    return CategoricalDistribution(
        std::vector<double>(target_support.begin(), target_support.end()), std::move(probs));
}

}  // namespace rdp
