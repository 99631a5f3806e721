#include "rdp/daa_vision.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rdp/sampling.hpp"

namespace rdp {
namespace daa {

Geometry sample_geometry(Rng& rng) {
    Geometry g;
    g.own_speed = rng.uniform(45.0, 55.0);
    g.intruder_speed = rng.uniform(45.0, 55.0);
    g.rel_heading_deg = rng.uniform(120.0, 240.0);
    g.visibility = rng.uniform(0.10, 1.1);
    return g;
}

double closing_speed(const Geometry& g) {
    const double psi = g.rel_heading_deg * M_PI / 180.0;
    const double vx = g.intruder_speed * std::cos(psi) - g.own_speed;
    const double vy = g.intruder_speed * std::sin(psi);
    return std::hypot(vx, vy);
}

DaaImage render_daa(double h, double tau, const Geometry& geometry, const RenderConfig& config,
                    std::uint64_t seed) {
    const int res = config.resolution;
    DaaImage image;
    image.resolution = res;
    image.pixels.assign(static_cast<std::size_t>(res) * static_cast<std::size_t>(res), 0.0);

    // Sky gradient background.
    for (int row = 0; row < res; ++row) {
        const double shade = config.sky_top +
                             (config.sky_bottom - config.sky_top) * row / (res - 1);
        for (int col = 0; col < res; ++col) {
            image.pixels[static_cast<std::size_t>(row * res + col)] = shade;
        }
    }

    Rng rng(seed);
    const double bearing = rng.uniform(-0.75, 0.75) * config.fov_halfangle;

    const double horiz_range = std::max(30.0, closing_speed(geometry) * tau);
    const double elevation = std::atan2(-h, horiz_range);  // intruder above ownship when h < 0
    image.present = std::abs(elevation) <= config.fov_halfangle;

    if (image.present) {
        const double slant = std::hypot(horiz_range, h);
        const double radius =
            std::clamp(config.blob_gain / std::max(slant, 1.0), config.blob_min_radius,
                       config.blob_max_radius);
        const double cx = res / 2.0 + bearing / config.fov_halfangle * (res / 2.0);
        const double cy = res / 2.0 - elevation / config.fov_halfangle * (res / 2.0);
        const double attenuation =
            std::exp(-slant / (geometry.visibility * config.visibility_range_m));
        const double peak = config.contrast * attenuation;

        const int lo_row = std::max(0, static_cast<int>(std::floor(cy - radius - 1.5)));
        const int hi_row = std::min(res - 1, static_cast<int>(std::ceil(cy + radius + 1.5)));
        const int lo_col = std::max(0, static_cast<int>(std::floor(cx - radius - 1.5)));
        const int hi_col = std::min(res - 1, static_cast<int>(std::ceil(cx + radius + 1.5)));
        for (int row = lo_row; row <= hi_row; ++row) {
            for (int col = lo_col; col <= hi_col; ++col) {
                const double dist = std::hypot(col + 0.5 - cx, row + 0.5 - cy);
                const double intensity = peak * std::clamp(1.0 - (dist - radius), 0.0, 1.0);
                if (intensity > 0.0) {
                    double& pixel = image.pixels[static_cast<std::size_t>(row * res + col)];
                    pixel = std::max(pixel, intensity);
                }
            }
        }
        image.box_cx = cx / res;
        image.box_cy = cy / res;
        image.box_w = std::min(1.0, (2.0 * radius + 1.0) / res);
        image.box_h = image.box_w;
    }

    if (config.noise_sigma > 0.0) {
        for (double& pixel : image.pixels) {
            pixel = std::clamp(pixel + config.noise_sigma * rng.normal(), 0.0, 1.0);
        }
    }
    return image;
}

std::vector<double> encode_detector_input(const DaaImage& image, int pool_size) {
    const int res = image.resolution;
    const int cells = res / pool_size;
    std::vector<double> encoded;
    encoded.reserve(2 * static_cast<std::size_t>(cells) * static_cast<std::size_t>(cells));
    for (int ci = 0; ci < cells; ++ci) {
        for (int cj = 0; cj < cells; ++cj) {
            double hi = 0.0;
            double sum = 0.0;
            for (int r = ci * pool_size; r < (ci + 1) * pool_size; ++r) {
                for (int c = cj * pool_size; c < (cj + 1) * pool_size; ++c) {
                    const double v = image.pixels[static_cast<std::size_t>(r * res + c)];
                    hi = std::max(hi, v);
                    sum += v;
                }
            }
            encoded.push_back(hi);
            encoded.push_back(sum / (pool_size * pool_size));
        }
    }
    return encoded;
}

int detector_input_dim(int resolution, int pool_size) {
    const int cells = resolution / pool_size;
    return 2 * cells * cells;
}

namespace {

void push_sample(nn::LabeledDataset& data, const DaaImage& image, double h, double tau) {
    const auto encoded = encode_detector_input(image);
    data.obs.insert(data.obs.end(), encoded.begin(), encoded.end());
    if (image.present) {
        data.labels.push_back(2.0 * image.box_cx - 1.0);
        data.labels.push_back(2.0 * image.box_cy - 1.0);
        data.labels.push_back(2.0 * image.box_w - 1.0);
        data.labels.push_back(2.0 * image.box_h - 1.0);
        data.labels.push_back(1.0);
    } else {
        for (int i = 0; i < 4; ++i) data.labels.push_back(0.0);
        data.labels.push_back(0.0);
    }
    data.states.push_back(h);
    data.states.push_back(tau);
}

}  // namespace

nn::LabeledDataset generate_detector_dataset(const DetectorDatasetConfig& config,
                                             const RiskTable& marginal, std::uint64_t seed) {
    if (config.n < 1) throw std::invalid_argument("generate_detector_dataset: n must be >= 1");
    const Grid& grid = marginal.state_grid();

    nn::LabeledDataset data;
    data.obs_dim = detector_input_dim(config.render.resolution);
    data.label_dim = 5;
    data.state_dim = 2;
    data.provenance = config.kind == DetectorDataKind::risk_weighted
                          ? nn::LabeledDataset::Provenance::risk_weighted
                          : nn::LabeledDataset::Provenance::uniform;

    std::vector<std::vector<double>> weighted_states;
    if (config.kind == DetectorDataKind::risk_weighted) {
        weighted_states =
            rejection_sample_states(marginal, RiskLevel(config.alpha), config.n, seed ^ 0x5157);
    }

    Rng rng(seed);
    for (std::size_t i = 0; i < config.n; ++i) {
        double h;
        double tau;
        if (config.kind == DetectorDataKind::risk_weighted) {
            h = weighted_states[i][0];
            tau = weighted_states[i][1];
        } else {
            h = rng.uniform(grid.axis_min(0), grid.axis_max(0));
            tau = rng.uniform(config.tau_min, config.tau_max);
        }
        Geometry geometry = sample_geometry(rng);
        if (config.fixed_visibility > 0.0) geometry.visibility = config.fixed_visibility;
        const bool force_negative = rng.uniform() < config.negative_fraction;
        DaaImage image;
        if (force_negative) {
            // Empty sky: same state bookkeeping, no intruder drawn.
            image = render_daa(1e9, tau, geometry, config.render, rng.next_u64());
        } else {
            image = render_daa(h, tau, geometry, config.render, rng.next_u64());
        }
        push_sample(data, image, h, tau);
    }
    return data;
}

nn::DenseNet train_detector(const nn::LabeledDataset& data, DetectorLoss loss_kind,
                            const RiskTable& marginal, const DetectorConfig& config) {
    std::vector<int> sizes;
    sizes.push_back(data.obs_dim);
    sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
    sizes.push_back(5);
    nn::DenseNet net(sizes, nn::OutputSpec{4, 1}, config.train.seed ^ 0xd37ec702u);

    const double cost_span = marginal.cost_support().back() - marginal.cost_support().front();
    const double lambda = config.lambda;
    const double alpha = config.alpha;
    const bool use_risk = loss_kind == DetectorLoss::risk;

    nn::LossFn loss = [&data, &marginal, cost_span, lambda, alpha, use_risk](
                          std::span<const double> output, std::size_t idx,
                          std::span<double> grad) {
        const auto label = data.label_row(idx);
        const bool present = label[4] > 0.5;
        const double p_hat = std::clamp(output[4], 1e-7, 1.0 - 1e-7);

        double loss_value = -(present ? std::log(p_hat) : std::log(1.0 - p_hat));
        grad[4] = (p_hat - (present ? 1.0 : 0.0)) / (p_hat * (1.0 - p_hat));

        if (present) {
            for (int j = 0; j < 4; ++j) {
                const double e = output[static_cast<std::size_t>(j)] - label[static_cast<std::size_t>(j)];
                loss_value += 0.25 * e * e;
                grad[static_cast<std::size_t>(j)] = 0.5 * e;
            }
            if (use_risk && lambda != 0.0) {
                const auto state = data.state_row(idx);
                const double risk = objectness_risk(marginal, state[0], state[1], p_hat,
                                                    RiskLevel(alpha));
                const double slope =
                    objectness_risk_gradient(marginal, state[0], state[1], RiskLevel(alpha));
                loss_value += lambda * risk / cost_span;
                grad[4] += lambda * slope / cost_span;
            }
        }
        return loss_value;
    };

    nn::train(net, data, config.train, loss);
    return net;
}

double detector_score(const nn::DenseNet& net, const DaaImage& image) {
    const auto out = net.forward(encode_detector_input(image));
    return out[4];
}

double calibrate_threshold(const nn::DenseNet& net, const nn::LabeledDataset& validation,
                           double false_positive_rate) {
    std::vector<double> negative_scores;
    std::vector<double> out(static_cast<std::size_t>(net.output_size()));
    for (std::size_t i = 0; i < validation.size(); ++i) {
        if (validation.label_row(i)[4] > 0.5) continue;
        net.forward(validation.obs_row(i), out);
        negative_scores.push_back(out[4]);
    }
    if (negative_scores.empty()) {
        throw std::invalid_argument("calibrate_threshold: validation set has no negatives");
    }
    std::sort(negative_scores.begin(), negative_scores.end());
    const double q = 1.0 - false_positive_rate;
    const std::size_t idx = std::min(
        negative_scores.size() - 1,
        static_cast<std::size_t>(q * static_cast<double>(negative_scores.size())));
    // Never calibrate below the raw 0.5 decision point.
    return std::max(0.5, negative_scores[idx]);
}

PrecisionRecall evaluate_detector(const nn::DenseNet& net, const nn::LabeledDataset& validation,
                                  double threshold) {
    PrecisionRecall pr;
    std::vector<double> out(static_cast<std::size_t>(net.output_size()));
    for (std::size_t i = 0; i < validation.size(); ++i) {
        net.forward(validation.obs_row(i), out);
        const bool detected = out[4] > threshold;
        const bool present = validation.label_row(i)[4] > 0.5;
        if (detected && present) ++pr.true_positives;
        if (detected && !present) ++pr.false_positives;
        if (!detected && present) ++pr.false_negatives;
    }
    pr.precision = (pr.true_positives + pr.false_positives) > 0
                       ? static_cast<double>(pr.true_positives) /
                             (pr.true_positives + pr.false_positives)
                       : 1.0;
    pr.recall = (pr.true_positives + pr.false_negatives) > 0
                    ? static_cast<double>(pr.true_positives) /
                          (pr.true_positives + pr.false_negatives)
                    : 0.0;
    return pr;
}

}  // namespace daa
}  // namespace rdp
