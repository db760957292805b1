#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fabtwin/image.hpp"
#include "fabtwin/rng.hpp"

namespace fabtwin {

inline constexpr int kDefaultBins = 256;
inline constexpr double kKlEpsilon = 1e-8;

/// |A and B| / |A or B|; two empty masks score 1.
double iou(const BitMask& a, const BitMask& b);

/// For each real r_i, one prediction drawn uniformly with
/// Rng(seed.child("match", i)); mean IoU in percent.
double match_random(const std::vector<BitMask>& preds, const std::vector<BitMask>& reals, RngSeed seed);
/// For each real, the best prediction (with replacement); mean IoU in percent.
double match_greedy(const std::vector<BitMask>& preds, const std::vector<BitMask>& reals);

/// Binarizes at 0.5.
std::vector<BitMask> binarize_all(const std::vector<GrayImage>& images);
std::vector<GrayImage> to_gray(const std::vector<BitMask>& masks);

GrayImage mean_image(const std::vector<GrayImage>& set);
GrayImage mean_image(const std::vector<BitMask>& set);

/// Uniform bins over [0,1], last bin right-inclusive. Adds `epsilon` to every
/// bin and renormalizes.
Histogram intensity_histogram(const GrayImage& img, int bins, double epsilon = 0.0);

/// sum P ln(P/Q), in nats. Bins with P = 0 contribute 0.
double kl_divergence(const Histogram& p_real, const Histogram& q_model);
/// Sum over bins of |CDF_P - CDF_Q| * bin_width.
double wasserstein_1d(const Histogram& p, const Histogram& q);
/// Mean W1 over all (generated, real) pairs of unsmoothed per-image histograms.
double wd_pairwise_mean(const std::vector<GrayImage>& gen_set, const std::vector<GrayImage>& real_set,
                        int bins = kDefaultBins);

/// Histograms of the two set means (epsilon-smoothed), then KL(real || model).
double kl_mean_image(const std::vector<GrayImage>& real_set, const std::vector<GrayImage>& model_set,
                     int bins = kDefaultBins, double epsilon = kKlEpsilon);

/// Per-pixel population variance; needs at least two images.
GrayImage variance_map(const std::vector<GrayImage>& set);
GrayImage variance_map(const std::vector<BitMask>& set);

struct UncertaintyMaps {
  GrayImage aleatoric;
  GrayImage epistemic;
  GrayImage total;
};

/// Raw per-pixel decomposition over unbounded values; each of the three
/// vectors has one entry per pixel.
struct UncertaintyValues {
  std::vector<double> aleatoric;
  std::vector<double> epistemic;
  std::vector<double> total;
};

/// samples[k][m][pixel]
UncertaintyValues decompose_uncertainty(const std::vector<std::vector<std::vector<double>>>& samples);
/// samples[k] holds model k's M images.
UncertaintyMaps decompose_uncertainty(const std::vector<std::vector<GrayImage>>& samples);

enum class Embedder { AvgPool8, Pixels16 };
Embedder parse_embedder(const std::string& s);
std::string to_string(Embedder e);

/// One row per image. Block-average down to an 8x8 (or 16x16) grid.
Eigen::MatrixXd embed_features(const std::vector<GrayImage>& set, Embedder embedder = Embedder::AvgPool8);

/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)); unbiased covariances.
double frechet_distance(const Eigen::MatrixXd& feat_a, const Eigen::MatrixXd& feat_b);

/// Pixels whose Euclidean distance to the layout boundary is <= radius. The
/// boundary is the set of pixels with a 4-neighbour of the other value.
BitMask edge_band(const BitMask& layout, int radius);
/// Pearson correlation of a and b over pixels where mask == 1. Returns 0 if
/// either side is constant there.
double masked_pearson(const GrayImage& a, const GrayImage& b, const BitMask& mask);

struct MetricReport {
  std::string structure_id;
  double iou_random_mean = 0.0;
  double iou_greedy_mean = 0.0;
  double kl_real_vs_model = 0.0;
  double wd_pairwise_mean = 0.0;
  double fd = 0.0;
  std::vector<std::string> metrics;
  int generated_count = 0;
  int real_count = 0;
  int bins = kDefaultBins;
  std::uint64_t seed = 0;
  Embedder embedder = Embedder::AvgPool8;
  nlohmann::json provenance = nlohmann::json::object();
};

nlohmann::json to_json(const MetricReport& r);

struct EvaluateOptions {
  std::vector<std::string> metrics{"iou", "kl", "wd", "fd"};
  int bins = kDefaultBins;
  RngSeed seed{0};
  Embedder embedder = Embedder::AvgPool8;
};

/// Metrics of a generated set against real outcomes. Generated images are
/// binarized at 0.5 for IoU; KL, W-D and FD use raw gray values.
MetricReport evaluate_sets(const std::vector<GrayImage>& real_set, const std::vector<GrayImage>& generated,
                           const EvaluateOptions& opts, const std::string& structure_id = "");

}  // namespace fabtwin
