#pragma once
// Synthetic desk-scale stand-in for the DAA camera pipeline: renders the
// intruder as a range-scaled blob on a noisy sky image, generates labeled
// detector datasets (uniform or risk-weighted over (h, tau)), and trains
// the box + objectness detector with baseline or risk-sensitive losses.

#include <cstdint>

#include "rdp/daa_risk.hpp"
#include "rdp/nets.hpp"
#include "rdp/rng.hpp"

namespace rdp {
namespace daa {

struct RenderConfig {
    int resolution = 32;
    double fov_halfangle = 0.35;  // radians, vertical and horizontal
    double blob_gain = 900.0;     // blob radius in px = gain / slant range
    double blob_min_radius = 0.6;
    double blob_max_radius = 6.0;
    double contrast = 0.85;
    // Apparent contrast follows Koschmieder attenuation,
    // exp(-range / (visibility * visibility_range_m)).
    double visibility_range_m = 4000.0;
    double noise_sigma = 0.05;
    double sky_top = 0.15;  // background gradient
    double sky_bottom = 0.35;
};

struct Geometry {
    double own_speed = 50.0;       // m/s
    double intruder_speed = 50.0;  // m/s
    double rel_heading_deg = 180.0;
    // Atmospheric contrast factor scaling the blob brightness; fixed for a
    // whole encounter, so detection failures correlate across frames the
    // way hazy conditions make them.
    double visibility = 1.0;
};

// Speeds uniform in [45, 55] m/s, relative heading uniform in [120, 240]
// degrees, visibility uniform in [0.10, 1.1].
Geometry sample_geometry(Rng& rng);

double closing_speed(const Geometry& g);

struct DaaImage {
    int resolution = 0;
    std::vector<double> pixels;  // row-major, [0, 1]
    bool present = false;        // intruder inside the field of view
    // Normalized box label, defined when present.
    double box_cx = 0.0, box_cy = 0.0, box_w = 0.0, box_h = 0.0;
};

// Vertical blob offset follows h / range, blob size 1 / range, with the
// slant range derived from tau and the sampled closing speed. States
// outside the field-of-view cone render with no intruder and presence 0.
DaaImage render_daa(double h, double tau, const Geometry& geometry, const RenderConfig& config,
                    std::uint64_t seed);

// Fixed pooled encoding fed to the detector: per-tile max and mean over
// pool_size x pool_size tiles. The max channel makes a small bright blob
// visible to a dense network regardless of where it lands in the frame.
std::vector<double> encode_detector_input(const DaaImage& image, int pool_size = 4);
int detector_input_dim(int resolution, int pool_size = 4);

enum class DetectorDataKind { uniform, risk_weighted };

struct DetectorDatasetConfig {
    DetectorDataKind kind = DetectorDataKind::uniform;
    std::size_t n = 4000;
    double alpha = 0.0;           // risk level for the weighting field
    double negative_fraction = 0.55;  // images rendered with no intruder
    double tau_min = 1.0;
    double tau_max = 40.0;
    // 0 samples the atmospheric visibility per image; > 0 fixes it, e.g.
    // 1.0 for a clear-weather validation set.
    double fixed_visibility = 0.0;
    RenderConfig render;
};

// Labels: [box cx, cy, w, h scaled to [-1, 1], presence]; states: [h, tau].
nn::LabeledDataset generate_detector_dataset(const DetectorDatasetConfig& config,
                                             const RiskTable& marginal, std::uint64_t seed);

struct DetectorConfig {
    std::vector<int> hidden = {64, 64};
    nn::TrainConfig train;
    double lambda = 1.0;  // risk-term weight for the risk loss
    double alpha = 0.0;
};

enum class DetectorLoss { baseline, risk };

// Box MSE (present images only) + objectness cross entropy, optionally
// plus the objectness-interpolated risk term normalized by the cost span.
nn::DenseNet train_detector(const nn::LabeledDataset& data, DetectorLoss loss_kind,
                            const RiskTable& marginal, const DetectorConfig& config);

// Objectness score for one image.
double detector_score(const nn::DenseNet& net, const DaaImage& image);

// Operating threshold at a fixed false-positive budget: the (1 - fpr)
// quantile of the objectness scores on the validation set's negative
// images. The same rule is applied to every detector variant.
double calibrate_threshold(const nn::DenseNet& net, const nn::LabeledDataset& validation,
                           double false_positive_rate = 0.002);

struct PrecisionRecall {
    double precision = 1.0;
    double recall = 0.0;
    int true_positives = 0;
    int false_positives = 0;
    int false_negatives = 0;
};

PrecisionRecall evaluate_detector(const nn::DenseNet& net, const nn::LabeledDataset& validation,
                                  double threshold = 0.5);

}  // namespace daa
}  // namespace rdp
