#include "fabtwin/virtual_fab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fabtwin/error.hpp"
#include "fabtwin/parallel.hpp"

namespace fabtwin {

namespace {

int reflect(int i, int n) {
  if (n == 1) return 0;
  // Edge-inclusive mirror: -1 -> 0, n -> n-1.
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (i * i) / (sigma * sigma));
  }
  const double s = std::accumulate(k.begin(), k.end(), 0.0);
  for (auto& v : k) v /= s;
  return k;
}

}  // namespace

void FabParams::validate() const {
  const double vals[] = {etch_bias_mean, etch_bias_sd, blur_sigma_px, roughness_amp, roughness_corr_len_px, jitter_sd_px};
  for (double v : vals) {
    if (!std::isfinite(v)) throw InvalidConfig("fab parameters must be finite");
  }
  if (etch_bias_sd < 0 || roughness_amp < 0 || jitter_sd_px < 0) {
    throw InvalidConfig("standard deviations and amplitudes must be nonnegative");
  }
  if (!(blur_sigma_px > 0)) throw InvalidConfig("blur_sigma_px must be positive");
  if (!(roughness_corr_len_px > 0)) throw InvalidConfig("roughness_corr_len_px must be positive");
}

nlohmann::json to_json(const FabParams& p) {
  return {{"etch_bias_mean", p.etch_bias_mean},
          {"etch_bias_sd", p.etch_bias_sd},
          {"blur_sigma_px", p.blur_sigma_px},
          {"roughness_amp", p.roughness_amp},
          {"roughness_corr_len_px", p.roughness_corr_len_px},
          {"jitter_sd_px", p.jitter_sd_px}};
}

FabParams fab_params_from_json(const nlohmann::json& j) {
  FabParams p;
  try {
    p.etch_bias_mean = j.value("etch_bias_mean", p.etch_bias_mean);
    p.etch_bias_sd = j.value("etch_bias_sd", p.etch_bias_sd);
    p.blur_sigma_px = j.value("blur_sigma_px", p.blur_sigma_px);
    p.roughness_amp = j.value("roughness_amp", p.roughness_amp);
    p.roughness_corr_len_px = j.value("roughness_corr_len_px", p.roughness_corr_len_px);
    p.jitter_sd_px = j.value("jitter_sd_px", p.jitter_sd_px);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed fab params: ") + e.what());
  }
  p.validate();
  return p;
}

Field gaussian_blur(const Field& in, double sigma_px) {
  if (!(sigma_px > 0)) throw InvalidInput("sigma must be positive");
  const auto k = gaussian_kernel(sigma_px);
  const int r = static_cast<int>(k.size() / 2);
  const int w = in.width, h = in.height;
  Field tmp{w, h, std::vector<double>(in.values.size())};
  Field out{w, h, std::vector<double>(in.values.size())};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * in(reflect(x + i, w), y);
      tmp.values[static_cast<std::size_t>(y * w + x)] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[static_cast<std::size_t>(i + r)] * tmp(x, reflect(y + i, h));
      out.values[static_cast<std::size_t>(y * w + x)] = acc;
    }
  }
  return out;
}

Field smooth_field(const BitMask& mask, double sigma_px) {
  Field f{mask.width(), mask.height(), std::vector<double>(mask.size())};
  std::transform(mask.bits().begin(), mask.bits().end(), f.values.begin(),
                 [](std::uint8_t b) { return b ? 1.0 : 0.0; });
  auto out = gaussian_blur(f, sigma_px);
  for (auto& v : out.values) v = std::clamp(v, 0.0, 1.0);
  return out;
}

Field roughness_field(int width, int height, double corr_len_px, double amp, RngSeed seed) {
  if (!(corr_len_px > 0)) throw InvalidInput("corr_len_px must be positive");
  if (width < 1 || height < 1) throw InvalidInput("field dimensions must be positive");
  Field zero{width, height, std::vector<double>(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0.0)};
  if (amp == 0.0) return zero;

  Rng rng(seed);
  Field noise = zero;
  for (auto& v : noise.values) v = rng.normal();
  Field f = gaussian_blur(noise, corr_len_px);

  const double n = static_cast<double>(f.values.size());
  const double mean = std::accumulate(f.values.begin(), f.values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : f.values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);
  for (auto& v : f.values) v = sd > 0 ? (v - mean) * (amp / sd) : 0.0;
  return f;
}

BitMask fab_sample(const BitMask& mask, const FabParams& params, RngSeed seed) {
  params.validate();
  int dx = 0, dy = 0;
  if (params.jitter_sd_px > 0) {
    Rng jr(seed.child("jitter", 0));
    dx = static_cast<int>(std::lround(jr.normal(0.0, params.jitter_sd_px)));
    dy = static_cast<int>(std::lround(jr.normal(0.0, params.jitter_sd_px)));
  }
  const BitMask shifted = (dx || dy) ? shift(mask, dx, dy) : mask;
  const Field f = smooth_field(shifted, params.blur_sigma_px);
  const Field r = roughness_field(mask.width(), mask.height(), params.roughness_corr_len_px, params.roughness_amp,
                                  seed.child("roughness", 0));
  Rng br(seed.child("bias", 0));
  const double bias = params.etch_bias_sd > 0 ? br.normal(params.etch_bias_mean, params.etch_bias_sd)
                                              : params.etch_bias_mean;
  const double level = 0.5 + bias;

  std::vector<std::uint8_t> bits(mask.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = f.values[i] + r.values[i] >= level ? 1 : 0;
  return BitMask(mask.width(), mask.height(), std::move(bits));
}

std::vector<BitMask> fab_batch(const BitMask& mask, int n, const FabParams& params, RngSeed seed) {
  if (n < 1) throw InvalidInput("batch size must be >= 1");
  params.validate();
  std::vector<BitMask> out(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    out[i] = fab_sample(mask, params, seed.child("fab", i));
  });
  return out;
}

}  // namespace fabtwin
