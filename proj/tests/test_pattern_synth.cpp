#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "fabtwin/error.hpp"
#include "fabtwin/pattern_synth.hpp"

using namespace fabtwin;

namespace {

double fill(const BitMask& m) { return static_cast<double>(m.count()) / static_cast<double>(m.size()); }

// Largest r such that every in-bounds pixel of the radius-r disk around
// (x, y) is foreground.
int inscribed_radius(const BitMask& m, int x, int y) {
  int r = 0;
  for (;; ++r) {
    const int n = r + 1;
    for (int dy = -n; dy <= n; ++dy)
      for (int dx = -n; dx <= n; ++dx) {
        if (dx * dx + dy * dy > n * n) continue;
        const int xx = x + dx, yy = y + dy;
        if (xx < 0 || yy < 0 || xx >= m.width() || yy >= m.height()) continue;
        if (!m(xx, yy)) return r;
      }
    if (n > m.width() + m.height()) return r;
  }
}

std::size_t xor_count(const BitMask& a, const BitMask& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a.bits()[i] != b.bits()[i];
  return n;
}

// 8-connected labels. Closing can leave a one-pixel bridge that touches two
// features only at corners; it belongs to them, not a feature of its own.
std::vector<int> label8(const BitMask& m, int* count) {
  const int w = m.width(), h = m.height();
  std::vector<int> labels(m.size(), 0);
  std::vector<int> stack;
  int next = 0;
  for (int start = 0; start < w * h; ++start) {
    if (!m.bits()[static_cast<std::size_t>(start)] || labels[static_cast<std::size_t>(start)]) continue;
    labels[static_cast<std::size_t>(start)] = ++next;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = p % w + dx, y = p / w + dy;
          if (x < 0 || y < 0 || x >= w || y >= h) continue;
          const auto q = static_cast<std::size_t>(y * w + x);
          if (m.bits()[q] && !labels[q]) {
            labels[q] = next;
            stack.push_back(static_cast<int>(q));
          }
        }
    }
  }
  *count = next;
  return labels;
}

}  // namespace

TEST(SynthSpec, Validation) {
  SynthSpec s;
  EXPECT_NO_THROW(s.validate());
  s.passband_high = 40;  // > size/2
  EXPECT_THROW(s.validate(), InvalidSpec);
  s = {};
  s.passband_low = 8;
  s.passband_high = 8;
  EXPECT_THROW(s.validate(), InvalidSpec);
  s = {};
  s.min_feature_px = 0;
  EXPECT_THROW(s.validate(), InvalidSpec);
  s = {};
  s.fill_target = 1.0;
  EXPECT_THROW(s.validate(), InvalidSpec);
}

TEST(SynthSpec, JsonRoundtrip) {
  SynthSpec s;
  s.size = 32;
  s.amplitude_law = AmplitudeLaw::Gaussian;
  s.passband_low = 1.5;
  auto back = synth_spec_from_json(to_json(s));
  EXPECT_EQ(back.size, 32);
  EXPECT_EQ(back.amplitude_law, AmplitudeLaw::Gaussian);
  EXPECT_DOUBLE_EQ(back.passband_low, 1.5);
}

TEST(SynthFourier, FillFractionAfterCleanup) {
  SynthSpec s;
  s.size = 64;
  s.passband_low = 2;
  s.passband_high = 8;
  s.fill_target = 0.5;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const double f = fill(synth_fourier_pattern(s, RngSeed(seed)));
    EXPECT_GE(f, 0.40) << seed;
    EXPECT_LE(f, 0.60) << seed;
  }
}

TEST(SynthFourier, QuantileThresholdHitsTargetBeforeCleanup) {
  SynthSpec s;
  s.cleanup_iterations = 0;
  for (double target : {0.2, 0.35, 0.5, 0.8}) {
    s.fill_target = target;
    EXPECT_NEAR(fill(synth_fourier_pattern(s, RngSeed(4))), target, 0.02) << target;
  }
}

TEST(SynthFourier, Deterministic) {
  SynthSpec s;
  EXPECT_EQ(synth_fourier_pattern(s, RngSeed(17)), synth_fourier_pattern(s, RngSeed(17)));
  EXPECT_NE(synth_fourier_pattern(s, RngSeed(17)), synth_fourier_pattern(s, RngSeed(18)));
}

TEST(SynthFourier, EmptyAnnulusRejected) {
  SynthSpec s;
  s.size = 4;
  s.passband_low = 1.1;
  s.passband_high = 1.3;  // radii present at size 4: 1, 1.414, 2, ...
  EXPECT_THROW(synth_fourier_pattern(s, RngSeed(0)), InvalidSpec);
}

// Independent check of the spectrum: a naive forward DFT of the field has
// no energy outside the passband annulus.
TEST(SynthFourier, FieldIsBandLimited) {
  SynthSpec s;
  s.size = 16;
  s.passband_low = 2;
  s.passband_high = 4;
  for (auto law : {AmplitudeLaw::Uniform, AmplitudeLaw::Gaussian}) {
    s.amplitude_law = law;
    const auto f = synth_fourier_field(s, RngSeed(3));
    const int n = s.size;
    double inside = 0, outside = 0;
    for (int ky = 0; ky < n; ++ky)
      for (int kx = 0; kx < n; ++kx) {
        std::complex<double> acc = 0;
        for (int y = 0; y < n; ++y)
          for (int x = 0; x < n; ++x) {
            const double ph = -2.0 * M_PI * (static_cast<double>(kx * x) + static_cast<double>(ky * y)) / n;
            acc += f[static_cast<std::size_t>(y * n + x)] * std::complex<double>(std::cos(ph), std::sin(ph));
          }
        const double fx = kx <= n / 2 ? kx : kx - n, fy = ky <= n / 2 ? ky : ky - n;
        const double r = std::hypot(fx, fy);
        (r >= 2 && r <= 4 ? inside : outside) += std::norm(acc);
      }
    EXPECT_GT(inside, 0.0);
    EXPECT_LT(outside, 1e-18 * std::max(1.0, inside));
  }
}

TEST(SynthFourier, CleanupRemovesThinComponents) {
  SynthSpec s;
  s.min_feature_px = 5;
  s.cleanup_iterations = 1;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = synth_fourier_pattern(s, RngSeed(seed));
    int ncomp = 0;
    const auto labels = label8(m, &ncomp);
    std::vector<int> best(static_cast<std::size_t>(ncomp) + 1, 0);
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) {
        const int l = labels[static_cast<std::size_t>(y * m.width() + x)];
        if (l > 0) best[static_cast<std::size_t>(l)] = std::max(best[static_cast<std::size_t>(l)], inscribed_radius(m, x, y));
      }
    for (int l = 1; l <= ncomp; ++l) EXPECT_GE(2 * best[static_cast<std::size_t>(l)] + 1, 3) << "seed " << seed;
  }
}

TEST(SynthFourierProperty, BothPhasesPresentAcrossFills) {
  SynthSpec s;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    s.fill_target = 0.2 + 0.6 * static_cast<double>(seed) / 49.0;
    const auto m = synth_fourier_pattern(s, RngSeed(1000 + seed));
    EXPECT_GT(m.count(), 0u) << seed;
    EXPECT_LT(m.count(), m.size()) << seed;
  }
}

TEST(Morphology, OpenRemovesSpeckleCloseFillsHole) {
  BitMask speck(9, 9);
  speck.set(4, 4, true);
  EXPECT_EQ(morph_open(speck, 1).count(), 0u);
  BitMask holed(9, 9, 1);
  holed.set(4, 4, false);
  EXPECT_EQ(morph_close(holed, 1).count(), 81u);
}

TEST(Morphology, ErodeDilateDisk) {
  BitMask dot(9, 9);
  dot.set(4, 4, true);
  EXPECT_EQ(dilate(dot, 2).count(), 13u);  // lattice points with dx^2+dy^2 <= 4
  EXPECT_EQ(erode(dilate(dot, 2), 2), dot);
  // Border offsets are ignored, so a full image stays full.
  EXPECT_EQ(erode(BitMask(5, 5, 1), 2).count(), 25u);
}

TEST(Components, FourConnected) {
  BitMask m(3, 3, std::vector<std::uint8_t>{1, 0, 0, 0, 1, 0, 0, 0, 1});
  int n = 0;
  label_components(m, &n);
  EXPECT_EQ(n, 3);
}

TEST(EvalStructures, CrossAreas) {
  EXPECT_EQ(make_eval_structure(StructureKind::Cross100).count(), 30000u);
  EXPECT_EQ(make_eval_structure(StructureKind::Cross50).count(), 200u * 50 * 2 - 50 * 50);
  EXPECT_EQ(make_eval_structure(StructureKind::Cross25).count(), 9375u);
  EXPECT_EQ(make_eval_structure(StructureKind::Square).count(), 10000u);
}

TEST(EvalStructures, TargetArea) {
  StructureGeometry g;
  const int ring = g.region_px * g.region_px - (g.region_px - 2 * g.target_ring_px) * (g.region_px - 2 * g.target_ring_px);
  for (auto [kind, w] : {std::pair{StructureKind::Target50, 50}, std::pair{StructureKind::Target100, 100}}) {
    const int cross = 2 * g.target_arm_len_px * w - w * w;
    EXPECT_EQ(static_cast<int>(make_eval_structure(kind, g).count()), ring + cross);
  }
}

TEST(EvalStructures, CentredAndInsideRegion) {
  for (auto kind : {StructureKind::Cross25, StructureKind::Cross50, StructureKind::Cross100, StructureKind::Square,
                    StructureKind::Target50, StructureKind::Target100}) {
    const auto m = make_eval_structure(kind);
    ASSERT_EQ(m.width(), 256);
    for (int y = 0; y < 256; ++y)
      for (int x = 0; x < 256; ++x) {
        if (x < 28 || x >= 228 || y < 28 || y >= 228) ASSERT_EQ(m(x, y), 0) << to_string(kind);
      }
    // 180 degree symmetry about the canvas centre. A 25 px bar cannot be
    // centred on a 256 px canvas, so Cross25 sits half a pixel off: its
    // turned copy differs in one row and one column strip on each side,
    // 2 * (200 - 25 + 200 - 25 - 1) pixels.
    const std::size_t expected = kind == StructureKind::Cross25 ? 698 : 0;
    EXPECT_EQ(xor_count(rotate90(rotate90(m)), m), expected) << to_string(kind);
  }
}

TEST(EvalStructures, CrossRotationInvariant) {
  for (auto kind : {StructureKind::Cross50, StructureKind::Cross100}) {
    const auto m = make_eval_structure(kind);
    EXPECT_EQ(rotate90(m), m) << to_string(kind);
  }
  // Desk-scale Cross25/Cross50 arms are 6 and 12 px on a 64 px canvas with
  // 50 px bars: exact. (Cross100 becomes an odd 25 px arm.)
  const auto desk = StructureGeometry{}.scaled(0.25, 64);
  for (auto kind : {StructureKind::Cross25, StructureKind::Cross50}) {
    const auto m = make_eval_structure(kind, desk);
    EXPECT_EQ(rotate90(m), m) << to_string(kind) << " at 64";
  }
  // Odd width on an even canvas: the quarter turn moves the vertical bar by
  // one column, 175 pixels leave and 175 arrive.
  const auto c25 = make_eval_structure(StructureKind::Cross25);
  EXPECT_EQ(rotate90(c25).count(), c25.count());
  EXPECT_EQ(xor_count(rotate90(c25), c25), 350u);
}

TEST(EvalStructures, ScaledGeometry) {
  const auto g = StructureGeometry{}.scaled(0.25, 64);
  EXPECT_EQ(g.region_px, 50);
  EXPECT_EQ(g.narrow_arm_px, 6);
  EXPECT_EQ(g.medium_arm_px, 12);
  EXPECT_EQ(make_eval_structure(StructureKind::Cross50, g).count(), 50u * 12 * 2 - 144);
}

TEST(EvalStructures, CanvasSmallerThanRegionRejected) {
  StructureGeometry g;
  g.canvas_px = 150;
  EXPECT_THROW(make_eval_structure(StructureKind::Cross25, g), InvalidInput);
}

TEST(EvalStructures, KindNames) {
  EXPECT_EQ(parse_structure_kind("target100"), StructureKind::Target100);
  EXPECT_EQ(to_string(StructureKind::Cross25), "cross25");
  EXPECT_THROW(parse_structure_kind("circle"), InvalidInput);
}

TEST(Augment, ClockwiseConvention) {
  BitMask m(2, 2, std::vector<std::uint8_t>{1, 0, 0, 0});
  EXPECT_EQ(rotate90(m), BitMask(2, 2, std::vector<std::uint8_t>{0, 1, 0, 0}));
}

TEST(Augment, FourPairsConsistentAndCountPreserving) {
  SynthSpec s;
  s.size = 32;
  const auto a = synth_fourier_pattern(s, RngSeed(1));
  const auto b = synth_fourier_pattern(s, RngSeed(2));
  const auto out = augment_rotations({a, b});
  ASSERT_EQ(out.size(), 4u);
  EXPECT_EQ(out[0].first, a);
  EXPECT_EQ(out[1].first, rotate90(a));
  EXPECT_EQ(out[2].second, rotate90(rotate90(b)));
  EXPECT_EQ(out[3].second, rotate90(rotate90(rotate90(b))));
  for (const auto& p : out) {
    EXPECT_EQ(p.first.count(), a.count());
    EXPECT_EQ(p.second.count(), b.count());
  }
}

TEST(Augment, DatasetSizeQuadruples) {
  std::size_t total = 0;
  for (int i = 0; i < 31; ++i) total += augment_rotations({BitMask(4, 4, 1), BitMask(4, 4, 0)}).size();
  EXPECT_EQ(total, 124u);
}

TEST(Augment, NonSquareRejected) {
  EXPECT_THROW(augment_rotations({BitMask(4, 3), BitMask(4, 3)}), InvalidInput);
}
