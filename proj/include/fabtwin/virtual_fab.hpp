#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "fabtwin/image.hpp"
#include "fabtwin/rng.hpp"

namespace fabtwin {

/// Stochastic process knobs. Lengths in pixels; bias is a threshold offset
/// (positive = over-etch, features shrink).
struct FabParams {
  double etch_bias_mean = 0.02;
  double etch_bias_sd = 0.02;
  double blur_sigma_px = 1.5;
  double roughness_amp = 0.06;
  double roughness_corr_len_px = 4.0;
  double jitter_sd_px = 0.5;

  void validate() const;
};

nlohmann::json to_json(const FabParams& p);
FabParams fab_params_from_json(const nlohmann::json& j);

/// Unbounded real raster used as a level-set.
struct Field {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  double operator()(int x, int y) const {
    return values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
};

/// Separable Gaussian blur of a real raster: kernel truncated at 3 sigma and
/// renormalized, reflect padding at the borders.
Field gaussian_blur(const Field& in, double sigma_px);

Field smooth_field(const BitMask& mask, double sigma_px);

/// White noise blurred with sigma = corr_len_px, rescaled to empirical
/// mean 0 and standard deviation `amp`.
Field roughness_field(int width, int height, double corr_len_px, double amp, RngSeed seed);

/// One fabricated outcome: jitter shift, blur, add roughness, threshold at
/// 0.5 + sampled etch bias.
BitMask fab_sample(const BitMask& mask, const FabParams& params, RngSeed seed);

/// n independent outcomes; item i uses seed.child("fab", i).
std::vector<BitMask> fab_batch(const BitMask& mask, int n, const FabParams& params, RngSeed seed);

}  // namespace fabtwin
