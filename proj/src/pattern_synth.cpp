#include "fabtwin/pattern_synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "fabtwin/error.hpp"

namespace fabtwin {

namespace {

using cplx = std::complex<double>;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Inverse DFT (no 1/N scaling) of `data` with the given element stride.
void inverse_dft_1d(cplx* data, int n, int stride, std::vector<cplx>& scratch) {
  scratch.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) scratch[static_cast<std::size_t>(i)] = data[static_cast<std::ptrdiff_t>(i) * stride];

  if (is_pow2(n)) {
    for (int i = 1, j = 0; i < n; ++i) {
      int bit = n >> 1;
      for (; j & bit; bit >>= 1) j ^= bit;
      j ^= bit;
      if (i < j) std::swap(scratch[static_cast<std::size_t>(i)], scratch[static_cast<std::size_t>(j)]);
    }
    for (int len = 2; len <= n; len <<= 1) {
      const double ang = 2.0 * std::numbers::pi / len;
      const cplx wlen(std::cos(ang), std::sin(ang));
      for (int i = 0; i < n; i += len) {
        cplx w(1.0, 0.0);
        for (int k = 0; k < len / 2; ++k) {
          auto& a = scratch[static_cast<std::size_t>(i + k)];
          auto& b = scratch[static_cast<std::size_t>(i + k + len / 2)];
          const cplx u = a, v = b * w;
          a = u + v;
          b = u - v;
          w *= wlen;
        }
      }
    }
    for (int i = 0; i < n; ++i) data[static_cast<std::ptrdiff_t>(i) * stride] = scratch[static_cast<std::size_t>(i)];
    return;
  }

  for (int k = 0; k < n; ++k) {
    cplx acc(0.0, 0.0);
    for (int j = 0; j < n; ++j) {
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(j) * k / n;
      acc += scratch[static_cast<std::size_t>(j)] * cplx(std::cos(ang), std::sin(ang));
    }
    data[static_cast<std::ptrdiff_t>(k) * stride] = acc;
  }
}

int signed_freq(int k, int n) { return k <= (n - 1) / 2 ? k : k - n; }

std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> off;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) off.emplace_back(dx, dy);
  return off;
}

}  // namespace

void SynthSpec::validate() const {
  if (size < 2) throw InvalidSpec("size must be >= 2");
  if (!(passband_low >= 0.0 && passband_low < passband_high && passband_high <= size / 2.0)) {
    throw InvalidSpec("passband must satisfy 0 <= low < high <= size/2");
  }
  if (!(fill_target > 0.0 && fill_target < 1.0)) throw InvalidSpec("fill_target must lie in (0,1)");
  if (min_feature_px < 1) throw InvalidSpec("min_feature_px must be >= 1");
  if (cleanup_iterations < 0) throw InvalidSpec("cleanup_iterations must be >= 0");
}

nlohmann::json to_json(const SynthSpec& s) {
  return {{"size", s.size},
          {"passband_low", s.passband_low},
          {"passband_high", s.passband_high},
          {"amplitude_law", s.amplitude_law == AmplitudeLaw::Uniform ? "uniform" : "gaussian"},
          {"fill_target", s.fill_target},
          {"min_feature_px", s.min_feature_px},
          {"cleanup_iterations", s.cleanup_iterations}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    s.size = j.value("size", s.size);
    s.passband_low = j.value("passband_low", s.passband_low);
    s.passband_high = j.value("passband_high", s.passband_high);
    const auto law = j.value("amplitude_law", std::string("uniform"));
    if (law == "uniform") {
      s.amplitude_law = AmplitudeLaw::Uniform;
    } else if (law == "gaussian") {
      s.amplitude_law = AmplitudeLaw::Gaussian;
    } else {
      throw InvalidSpec("amplitude_law must be uniform or gaussian");
    }
    s.fill_target = j.value("fill_target", s.fill_target);
    s.min_feature_px = j.value("min_feature_px", s.min_feature_px);
    s.cleanup_iterations = j.value("cleanup_iterations", s.cleanup_iterations);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSpec(std::string("malformed synth spec: ") + e.what());
  }
  return s;
}

std::vector<double> synth_fourier_field(const SynthSpec& spec, RngSeed seed) {
  spec.validate();
  const int n = spec.size;
  std::vector<cplx> spectrum(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  Rng rng(seed.child("spectrum", 0));
  int modes = 0;

  for (int ky = 0; ky < n; ++ky) {
    for (int kx = 0; kx < n; ++kx) {
      const double r = std::hypot(signed_freq(kx, n), signed_freq(ky, n));
      if (r <= 0.0 || r < spec.passband_low || r > spec.passband_high) continue;
      const int px = (n - kx) % n, py = (n - ky) % n;
      const int idx = ky * n + kx, partner = py * n + px;
      if (partner < idx) continue;  // already set as a conjugate
      const double amp = spec.amplitude_law == AmplitudeLaw::Uniform ? rng.uniform() : rng.normal();
      const double phase = 2.0 * std::numbers::pi * rng.uniform();
      ++modes;
      if (partner == idx) {
        spectrum[static_cast<std::size_t>(idx)] = cplx(amp * std::cos(phase), 0.0);
      } else {
        spectrum[static_cast<std::size_t>(idx)] = std::polar(amp, phase);
        spectrum[static_cast<std::size_t>(partner)] = std::polar(amp, -phase);
      }
    }
  }
  if (modes == 0) throw InvalidSpec("passband annulus contains no frequencies for this size");

  std::vector<cplx> scratch;
  for (int y = 0; y < n; ++y) inverse_dft_1d(spectrum.data() + static_cast<std::ptrdiff_t>(y) * n, n, 1, scratch);
  for (int x = 0; x < n; ++x) inverse_dft_1d(spectrum.data() + x, n, n, scratch);

  std::vector<double> field(spectrum.size());
  std::transform(spectrum.begin(), spectrum.end(), field.begin(), [](const cplx& c) { return c.real(); });
  return field;
}

BitMask synth_fourier_pattern(const SynthSpec& spec, RngSeed seed) {
  const auto field = synth_fourier_field(spec, seed);
  std::vector<double> sorted = field;
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  auto idx = static_cast<std::size_t>(std::floor((1.0 - spec.fill_target) * static_cast<double>(n)));
  idx = std::min(idx, n - 1);
  const double threshold = sorted[idx];

  std::vector<std::uint8_t> bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = field[i] >= threshold ? 1 : 0;
  BitMask mask(spec.size, spec.size, std::move(bits));

  const int radius = (spec.min_feature_px + 1) / 2;
  for (int it = 0; it < spec.cleanup_iterations; ++it) mask = morph_close(morph_open(mask, radius), radius);
  return mask;
}

BitMask erode(const BitMask& m, int radius) {
  if (radius <= 0) return m;
  const auto off = disk_offsets(radius);
  BitMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      bool keep = true;
      for (auto [dx, dy] : off) {
        const int sx = x + dx, sy = y + dy;
        if (sx < 0 || sy < 0 || sx >= m.width() || sy >= m.height()) continue;
        if (!m(sx, sy)) {
          keep = false;
          break;
        }
      }
      if (keep) out.set(x, y, true);
    }
  }
  return out;
}

BitMask dilate(const BitMask& m, int radius) {
  if (radius <= 0) return m;
  const auto off = disk_offsets(radius);
  BitMask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m(x, y)) continue;
      for (auto [dx, dy] : off) {
        const int sx = x + dx, sy = y + dy;
        if (sx < 0 || sy < 0 || sx >= m.width() || sy >= m.height()) continue;
        out.set(sx, sy, true);
      }
    }
  }
  return out;
}

BitMask morph_open(const BitMask& m, int radius) { return dilate(erode(m, radius), radius); }
BitMask morph_close(const BitMask& m, int radius) { return erode(dilate(m, radius), radius); }

std::vector<int> label_components(const BitMask& m, int* count) {
  const int w = m.width(), h = m.height();
  std::vector<int> labels(m.size(), 0);
  std::vector<int> stack;
  int next = 0;
  for (int start = 0; start < w * h; ++start) {
    if (!m.bits()[static_cast<std::size_t>(start)] || labels[static_cast<std::size_t>(start)]) continue;
    ++next;
    labels[static_cast<std::size_t>(start)] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w, y = p / w;
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nb) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= w || q[1] >= h) continue;
        const int qi = q[1] * w + q[0];
        if (m.bits()[static_cast<std::size_t>(qi)] && !labels[static_cast<std::size_t>(qi)]) {
          labels[static_cast<std::size_t>(qi)] = next;
          stack.push_back(qi);
        }
      }
    }
  }
  if (count) *count = next;
  return labels;
}

StructureKind parse_structure_kind(std::string_view name) {
  if (name == "cross25") return StructureKind::Cross25;
  if (name == "cross50") return StructureKind::Cross50;
  if (name == "cross100") return StructureKind::Cross100;
  if (name == "square") return StructureKind::Square;
  if (name == "target50") return StructureKind::Target50;
  if (name == "target100") return StructureKind::Target100;
  throw InvalidInput("unknown structure kind '" + std::string(name) + "'");
}

std::string to_string(StructureKind kind) {
  switch (kind) {
    case StructureKind::Cross25: return "cross25";
    case StructureKind::Cross50: return "cross50";
    case StructureKind::Cross100: return "cross100";
    case StructureKind::Square: return "square";
    case StructureKind::Target50: return "target50";
    case StructureKind::Target100: return "target100";
  }
  return "unknown";
}

StructureGeometry StructureGeometry::scaled(double factor, int canvas) const {
  auto f = [factor](int v) { return std::max(1, static_cast<int>(std::floor(v * factor + 1e-9))); };
  StructureGeometry g;
  g.canvas_px = canvas;
  g.region_px = f(region_px);
  g.narrow_arm_px = f(narrow_arm_px);
  g.medium_arm_px = f(medium_arm_px);
  g.wide_arm_px = f(wide_arm_px);
  g.square_side_px = f(square_side_px);
  g.target_arm_len_px = f(target_arm_len_px);
  g.target_ring_px = f(target_ring_px);
  return g;
}

int StructureGeometry::arm_width(StructureKind kind) const {
  switch (kind) {
    case StructureKind::Cross25: return narrow_arm_px;
    case StructureKind::Cross50:
    case StructureKind::Target50: return medium_arm_px;
    case StructureKind::Cross100:
    case StructureKind::Target100: return wide_arm_px;
    case StructureKind::Square: return 0;
  }
  return 0;
}

namespace {

void fill_rect(BitMask& m, int x0, int y0, int w, int h) {
  for (int y = std::max(0, y0); y < std::min(m.height(), y0 + h); ++y)
    for (int x = std::max(0, x0); x < std::min(m.width(), x0 + w); ++x) m.set(x, y, true);
}

}  // namespace

BitMask make_cross(int canvas, int length, int width) {
  if (canvas < 1 || length < 1 || width < 1) throw InvalidInput("cross dimensions must be positive");
  BitMask m(canvas, canvas);
  fill_rect(m, (canvas - length) / 2, (canvas - width) / 2, length, width);
  fill_rect(m, (canvas - width) / 2, (canvas - length) / 2, width, length);
  return m;
}

BitMask make_eval_structure(StructureKind kind, const StructureGeometry& g) {
  if (g.canvas_px < g.region_px) throw InvalidInput("canvas must be at least as large as the structure region");
  const int c = g.canvas_px;
  switch (kind) {
    case StructureKind::Cross25:
    case StructureKind::Cross50:
    case StructureKind::Cross100: return make_cross(c, g.region_px, g.arm_width(kind));
    case StructureKind::Square: {
      BitMask m(c, c);
      fill_rect(m, (c - g.square_side_px) / 2, (c - g.square_side_px) / 2, g.square_side_px, g.square_side_px);
      return m;
    }
    case StructureKind::Target50:
    case StructureKind::Target100: {
      BitMask m = make_cross(c, g.target_arm_len_px, g.arm_width(kind));
      const int o = (c - g.region_px) / 2, t = g.target_ring_px, r = g.region_px;
      fill_rect(m, o, o, r, t);
      fill_rect(m, o, o + r - t, r, t);
      fill_rect(m, o, o, t, r);
      fill_rect(m, o + r - t, o, t, r);
      return m;
    }
  }
  throw InvalidInput("unknown structure kind");
}

std::vector<std::pair<BitMask, BitMask>> augment_rotations(const std::pair<BitMask, BitMask>& pair) {
  const auto& [a, b] = pair;
  if (a.width() != a.height() || b.width() != b.height()) throw InvalidInput("rotation augmentation needs square images");
  std::vector<std::pair<BitMask, BitMask>> out;
  out.push_back(pair);
  for (int k = 1; k < 4; ++k) out.emplace_back(rotate90(out.back().first), rotate90(out.back().second));
  return out;
}

}  // namespace fabtwin
