#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fabtwin/error.hpp"
#include "fabtwin/evaluation.hpp"
#include "fabtwin/pattern_synth.hpp"
#include "fabtwin/virtual_fab.hpp"

using namespace fabtwin;

namespace {

FabParams quiet(double bias = 0.0, double sigma = 1.5) {
  FabParams p;
  p.etch_bias_mean = bias;
  p.etch_bias_sd = 0.0;
  p.blur_sigma_px = sigma;
  p.roughness_amp = 0.0;
  p.jitter_sd_px = 0.0;
  return p;
}

double mean_over(const GrayImage& img, const BitMask& where) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    if (where.bits()[i]) {
      s += img.values()[i];
      ++n;
    }
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

BitMask invert(const BitMask& m) {
  BitMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) out.set(x, y, !m(x, y));
  return out;
}

double lag1_autocorr(const Field& f) {
  double s = 0, s2 = 0, c = 0;
  std::size_t n = 0, m = 0;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x < f.width; ++x) {
      s += f(x, y);
      s2 += f(x, y) * f(x, y);
      ++n;
    }
  const double mean = s / static_cast<double>(n), var = s2 / static_cast<double>(n) - mean * mean;
  for (int y = 0; y < f.height; ++y)
    for (int x = 0; x + 1 < f.width; ++x) {
      c += (f(x, y) - mean) * (f(x + 1, y) - mean);
      ++m;
    }
  return c / static_cast<double>(m) / var;
}

}  // namespace

TEST(FabParams, ValidationAndJson) {
  FabParams p;
  EXPECT_NO_THROW(p.validate());
  auto back = fab_params_from_json(to_json(p));
  EXPECT_DOUBLE_EQ(back.roughness_corr_len_px, 4.0);
  EXPECT_DOUBLE_EQ(back.jitter_sd_px, 0.5);
  p.etch_bias_sd = -1;
  EXPECT_THROW(p.validate(), InvalidConfig);
  p = {};
  p.blur_sigma_px = 0;
  EXPECT_THROW(p.validate(), InvalidConfig);
  p = {};
  p.roughness_amp = std::nan("");
  EXPECT_THROW(p.validate(), InvalidConfig);
}

TEST(SmoothField, ConstantMaskStaysConstant) {
  const auto f = smooth_field(BitMask(40, 30, 1), 2.0);
  for (double v : f.values) EXPECT_NEAR(v, 1.0, 1e-6);
}

TEST(SmoothField, StepEdgeCrossesHalfAtTheEdge) {
  // Columns < 32 are 0, the rest 1. By symmetry of the kernel the level 0.5
  // sits midway between columns 31 and 32.
  BitMask m(64, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 32; x < 64; ++x) m.set(x, y, true);
  for (double sigma : {1.0, 1.5, 3.0}) {
    const auto f = smooth_field(m, sigma);
    EXPECT_NEAR(0.5 * (f(31, 4) + f(32, 4)), 0.5, 0.02) << sigma;
    EXPECT_LT(f(31, 4), 0.5);
    EXPECT_GT(f(32, 4), 0.5);
    // Independent value: truncated, renormalized discrete Gaussian CDF.
    const int r = static_cast<int>(std::ceil(3 * sigma));
    double num = 0, den = 0;
    for (int k = -r; k <= r; ++k) {
      const double w = std::exp(-0.5 * k * k / (sigma * sigma));
      den += w;
      if (32 + k >= 32) num += w;  // taps landing on the foreground half
    }
    EXPECT_NEAR(f(32, 4), num / den, 1e-9) << sigma;
  }
}

TEST(SmoothField, PreservesMassOnInteriorMasks) {
  const auto m = make_eval_structure(StructureKind::Cross50);
  const auto f = smooth_field(m, 1.5);
  double s = 0;
  for (double v : f.values) s += v;
  EXPECT_NEAR(s, static_cast<double>(m.count()), 1e-3 * static_cast<double>(m.count()));
  for (double v : f.values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Roughness, ZeroAmplitudeIsZero) {
  const auto r = roughness_field(32, 32, 4.0, 0.0, RngSeed(1));
  for (double v : r.values) EXPECT_EQ(v, 0.0);
}

TEST(Roughness, ExactMomentsByRescaling) {
  const auto r = roughness_field(256, 256, 4.0, 0.1, RngSeed(7));
  double s = 0, s2 = 0;
  for (double v : r.values) s += v;
  const double mean = s / static_cast<double>(r.values.size());
  for (double v : r.values) s2 += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 0.0, 1e-9);
  EXPECT_NEAR(std::sqrt(s2 / static_cast<double>(r.values.size())), 0.1, 1e-6);
}

TEST(Roughness, AutocorrelationGrowsWithCorrelationLength) {
  double prev = -1.0;
  for (double len : {1.0, 4.0, 16.0}) {
    const double a = lag1_autocorr(roughness_field(128, 128, len, 0.1, RngSeed(3)));
    EXPECT_GT(a, prev) << len;
    prev = a;
  }
}

TEST(Roughness, DeterministicGivenSeed) {
  EXPECT_EQ(roughness_field(16, 16, 2.0, 0.1, RngSeed(5)).values, roughness_field(16, 16, 2.0, 0.1, RngSeed(5)).values);
}

TEST(FabSample, NoiseFreeChangesOnlyNearBoundaries) {
  const auto layout = make_eval_structure(StructureKind::Cross100);
  const auto near = edge_band(layout, 2);
  for (double sigma : {0.5, 1.0, 1.5}) {
    const auto out = fab_sample(layout, quiet(0.0, sigma), RngSeed(1));
    for (std::size_t i = 0; i < layout.size(); ++i) {
      if (layout.bits()[i] != out.bits()[i]) ASSERT_TRUE(near.bits()[i]) << "sigma " << sigma << " pixel " << i;
    }
  }
}

TEST(FabSample, PositiveBiasShrinks) {
  const auto layout = make_eval_structure(StructureKind::Cross50);
  const auto base = fab_sample(layout, quiet(0.0), RngSeed(1));
  const auto etched = fab_sample(layout, quiet(0.2), RngSeed(1));
  EXPECT_LT(etched.count(), base.count());
}

TEST(FabSample, AreaMonotoneInBias) {
  const auto layout = make_eval_structure(StructureKind::Target50);
  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (double b : {-0.2, -0.1, 0.0, 0.1, 0.2}) {
    const auto a = fab_sample(layout, quiet(b), RngSeed(2)).count();
    EXPECT_LE(a, prev) << b;
    prev = a;
  }
}

TEST(FabSample, SeedsDifferWithRoughness) {
  const auto layout = make_eval_structure(StructureKind::Cross25);
  FabParams p;
  EXPECT_NE(fab_sample(layout, p, RngSeed(1)), fab_sample(layout, p, RngSeed(2)));
  EXPECT_EQ(fab_sample(layout, p, RngSeed(1)), fab_sample(layout, p, RngSeed(1)));
}

TEST(FabBatch, ThirtyFiveDistinctOutcomes) {
  const auto layout = make_eval_structure(StructureKind::Cross50);
  const auto batch = fab_batch(layout, 35, FabParams{}, RngSeed(11));
  ASSERT_EQ(batch.size(), 35u);
  std::set<std::vector<std::uint8_t>> distinct;
  for (const auto& m : batch) distinct.insert({m.bits().begin(), m.bits().end()});
  EXPECT_GE(distinct.size(), 34u);
}

TEST(FabBatch, SingleItemUsesChildZero) {
  const auto layout = make_eval_structure(StructureKind::Square);
  FabParams p;
  const auto one = fab_batch(layout, 1, p, RngSeed(4));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], fab_sample(layout, p, RngSeed(4).child("fab", 0)));
}

TEST(FabBatch, RejectsNonPositiveCount) {
  EXPECT_THROW(fab_batch(BitMask(4, 4), 0, FabParams{}, RngSeed(0)), InvalidInput);
}

TEST(FabBatch, VarianceConcentratesAtEdges) {
  const auto layout = make_eval_structure(StructureKind::Cross50);
  FabParams p;
  const auto var = variance_map(fab_batch(layout, 35, p, RngSeed(21)));
  const auto edge = edge_band(layout, 2);
  const int far = static_cast<int>(std::ceil(3 * p.blur_sigma_px + 3 * p.roughness_corr_len_px));
  const auto interior = invert(edge_band(layout, far));
  EXPECT_LE(mean_over(var, interior), 0.1 * mean_over(var, edge));
  EXPECT_GT(mean_over(var, edge), 0.0);
}

// The expectation is symmetric; the estimate carries Monte Carlo error of
// about 0.5/sqrt(n) per pixel, so n is chosen large enough that a 0.05
// per-pixel bound tests the mechanism rather than the sampling noise.
TEST(FabSampleProperty, MeanOutcomeIsFourFoldSymmetric) {
  const auto geom = StructureGeometry{}.scaled(0.25, 64);
  FabParams p;
  p.jitter_sd_px = 0.0;
  for (auto kind : {StructureKind::Cross50, StructureKind::Target50}) {
    const auto layout = make_eval_structure(kind, geom);
    ASSERT_EQ(rotate90(layout), layout);
    const auto mean = mean_image(fab_batch(layout, 4000, p, RngSeed(8)));
    auto r = mean;
    for (int turn = 1; turn <= 3; ++turn) {
      r = rotate90(r);
      float worst = 0;
      for (std::size_t i = 0; i < mean.size(); ++i) worst = std::max(worst, std::abs(mean.values()[i] - r.values()[i]));
      EXPECT_LE(worst, 0.05f) << to_string(kind) << " turn " << turn;
    }
  }
}
