#include "fabtwin/plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "fabtwin/error.hpp"

namespace fabtwin {

namespace {

// 256-entry dark-to-bright ramp (black, purple, red, orange, pale yellow).
std::vector<Rgb> heat_palette() {
  const std::array<std::array<double, 3>, 5> stops{{{0, 0, 4}, {87, 16, 110}, {188, 55, 84}, {249, 142, 9}, {252, 255, 164}}};
  std::vector<Rgb> pal(256);
  for (int i = 0; i < 256; ++i) {
    const double t = i / 255.0 * 4.0;
    const int k = std::min(3, static_cast<int>(t));
    const double f = t - k;
    for (int c = 0; c < 3; ++c) {
      pal[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] =
          static_cast<std::uint8_t>(std::lround(stops[k][c] + f * (stops[k + 1][c] - stops[k][c])));
    }
  }
  return pal;
}

// 5x7 glyphs, bit 4 is the leftmost column.
struct Glyph {
  char c;
  std::array<std::uint8_t, 7> rows;
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'.', {0, 0, 0, 0, 0, 0x0C, 0x0C}},                {'-', {0, 0, 0, 0x1F, 0, 0, 0}},
    {'+', {0, 0x04, 0x04, 0x1F, 0x04, 0x04, 0}},       {'_', {0, 0, 0, 0, 0, 0, 0x1F}},
    {'/', {0, 0x01, 0x02, 0x04, 0x08, 0x10, 0}},       {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
    {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}}, {'a', {0, 0, 0x0E, 0x01, 0x0F, 0x11, 0x0F}},
    {'e', {0, 0, 0x0E, 0x11, 0x1F, 0x10, 0x0E}},       {'f', {0x06, 0x09, 0x08, 0x1C, 0x08, 0x08, 0x08}},
    {'g', {0, 0x0F, 0x11, 0x11, 0x0F, 0x01, 0x0E}},    {'h', {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x11}},
    {'i', {0x04, 0, 0x0C, 0x04, 0x04, 0x04, 0x0E}},    {'l', {0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'m', {0, 0, 0x1A, 0x15, 0x15, 0x11, 0x11}},       {'n', {0, 0, 0x16, 0x19, 0x11, 0x11, 0x11}},
    {'o', {0, 0, 0x0E, 0x11, 0x11, 0x11, 0x0E}},       {'p', {0, 0, 0x1E, 0x11, 0x1E, 0x10, 0x10}},
    {'r', {0, 0, 0x16, 0x19, 0x10, 0x10, 0x10}},       {'s', {0, 0, 0x0E, 0x10, 0x0E, 0x01, 0x1E}},
    {'t', {0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06}}, {'v', {0, 0, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'x', {0, 0, 0x11, 0x0A, 0x04, 0x0A, 0x11}},       {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
};

enum Color : std::uint8_t { kWhite, kBlack, kGrid, kBlue, kRed };
const Rgb kChartPalette[] = {{255, 255, 255}, {0, 0, 0}, {225, 225, 225}, {31, 90, 180}, {200, 40, 40}};

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w * h), kWhite) {}

  void put(int x, int y, std::uint8_t c) {
    if (x >= 0 && y >= 0 && x < w_ && y < h_) px_[static_cast<std::size_t>(y * w_ + x)] = c;
  }

  void line(int x0, int y0, int x1, int y1, std::uint8_t c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      put(x0, y0, c);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  // Filled 5x5 square.
  void marker(int x, int y, std::uint8_t c) {
    for (int dy = -2; dy <= 2; ++dy) {
      for (int dx = -2; dx <= 2; ++dx) put(x + dx, y + dy, c);
    }
  }

  // 7x7 outline, so a point sitting on a filled marker stays visible.
  void ring(int x, int y, std::uint8_t c) {
    for (int k = -3; k <= 3; ++k) {
      put(x + k, y - 3, c);
      put(x + k, y + 3, c);
      put(x - 3, y + k, c);
      put(x + 3, y + k, c);
    }
  }

  static int text_width(const std::string& s) { return static_cast<int>(s.size()) * 6 - 1; }

  void text(int x, int y, const std::string& s, std::uint8_t c) {
    for (char ch : s) {
      for (const auto& g : kFont) {
        if (g.c != ch) continue;
        for (int r = 0; r < 7; ++r) {
          for (int k = 0; k < 5; ++k) {
            if (g.rows[static_cast<std::size_t>(r)] & (0x10 >> k)) put(x + k, y + r, c);
          }
        }
      }
      x += 6;
    }
  }

  Bytes png() const {
    return encode_indexed(w_, h_, px_, std::span<const Rgb>(kChartPalette, std::size(kChartPalette)));
  }

 private:
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Range {
  double lo, hi;
};

Range data_range(const std::vector<double>& v) {
  double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
  if (hi - lo < 1e-12) {
    const double pad = std::abs(hi) > 0 ? std::abs(hi) * 0.1 : 0.5;
    lo -= pad;
    hi += pad;
  }
  return {lo, hi};
}

// Keeps extreme points off the frame.
Range padded_range(const std::vector<double>& v) {
  const Range r = data_range(v);
  const double pad = 0.05 * (r.hi - r.lo);
  return {r.lo - pad, r.hi + pad};
}

Bytes chart(const std::vector<double>& steps, const std::vector<double>& left, const std::string& left_name,
            const std::vector<double>& right, const std::string& right_name) {
  constexpr int W = 640, H = 400, ml = 64, mr = 64, mt = 36, mb = 40;
  const int pw = W - ml - mr, ph = H - mt - mb;
  Canvas cv(W, H);

  const Range xs = padded_range(steps), yl = padded_range(left), yr = padded_range(right);
  auto px = [&](double s) { return ml + static_cast<int>(std::lround((s - xs.lo) / (xs.hi - xs.lo) * pw)); };
  auto py = [&](double v, Range r) { return mt + ph - static_cast<int>(std::lround((v - r.lo) / (r.hi - r.lo) * ph)); };

  constexpr int ticks = 5;
  for (int i = 0; i < ticks; ++i) {
    const double f = static_cast<double>(i) / (ticks - 1);
    const int y = mt + ph - static_cast<int>(std::lround(f * ph));
    const int x = ml + static_cast<int>(std::lround(f * pw));
    cv.line(ml + 1, y, ml + pw - 1, y, kGrid);
    cv.line(ml - 4, y, ml, y, kBlack);
    cv.line(ml + pw, y, ml + pw + 4, y, kBlack);
    const std::string l = fmt(yl.lo + f * (yl.hi - yl.lo)), r = fmt(yr.lo + f * (yr.hi - yr.lo));
    cv.text(ml - 7 - Canvas::text_width(l), y - 3, l, kBlue);
    cv.text(ml + pw + 7, y - 3, r, kRed);
    cv.line(x, mt + ph, x, mt + ph + 4, kBlack);
    const std::string sx = fmt(xs.lo + f * (xs.hi - xs.lo));
    cv.text(x - Canvas::text_width(sx) / 2, mt + ph + 8, sx, kBlack);
  }
  cv.line(ml, mt, ml, mt + ph, kBlack);
  cv.line(ml + pw, mt, ml + pw, mt + ph, kBlack);
  cv.line(ml, mt + ph, ml + pw, mt + ph, kBlack);
  cv.line(ml, mt, ml + pw, mt, kBlack);

  // Lines first, then markers, so no line cuts through a marker.
  auto lines = [&](const std::vector<double>& v, Range r, std::uint8_t c) {
    for (std::size_t i = 1; i < v.size(); ++i) cv.line(px(steps[i - 1]), py(v[i - 1], r), px(steps[i]), py(v[i], r), c);
  };
  lines(left, yl, kBlue);
  lines(right, yr, kRed);
  for (std::size_t i = 0; i < steps.size(); ++i) cv.marker(px(steps[i]), py(left[i], yl), kBlue);
  for (std::size_t i = 0; i < steps.size(); ++i) cv.ring(px(steps[i]), py(right[i], yr), kRed);

  const std::string lt = left_name + " (left)", rt = right_name + " (right)";
  cv.text(ml, 12, lt, kBlue);
  cv.text(ml + pw - Canvas::text_width(rt), 12, rt, kRed);
  cv.text(ml + pw / 2 - Canvas::text_width("step") / 2, H - 14, "step", kBlack);
  return cv.png();
}

}  // namespace

Bytes render_heatmap(const GrayImage& map, HeatmapScale scale) {
  if (map.size() == 0) throw InvalidInput("heatmap: empty map");
  double top = scale.max;
  if (scale.automatic) {
    top = 0.0;
    for (float v : map.values()) top = std::max(top, static_cast<double>(v));
  } else if (!(scale.max > 0.0) || !std::isfinite(scale.max)) {
    throw InvalidInput("heatmap: fixed scale maximum must be positive");
  }
  std::vector<std::uint8_t> idx(map.size(), 0);
  if (top > 0.0) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double v = map.values()[i];
      idx[i] = v >= top ? 255 : static_cast<std::uint8_t>(std::clamp(std::floor(v / top * 255.0), 0.0, 254.0));
    }
  }
  const auto pal = heat_palette();
  return encode_indexed(map.width(), map.height(), idx, pal);
}

LossCharts plot_loss_curves(const std::vector<LossRecord>& log) {
  if (log.empty()) throw InvalidInput("loss log has no rows");
  std::vector<double> step, d, total, gan, l1;
  for (const auto& r : log) {
    for (double v : {r.loss_D, r.loss_G_total, r.loss_G_gan, r.loss_G_l1}) {
      if (!std::isfinite(v)) throw InvalidInput("loss log step " + std::to_string(r.step) + " has a non-finite value");
    }
    step.push_back(r.step);
    d.push_back(r.loss_D);
    total.push_back(r.loss_G_total);
    gan.push_back(r.loss_G_gan);
    l1.push_back(r.loss_G_l1);
  }
  return {chart(step, d, "loss_D", total, "loss_G_total"), chart(step, gan, "loss_G_gan", l1, "loss_G_l1")};
}

LossCharts plot_loss_curves(const std::filesystem::path& csv) { return plot_loss_curves(read_loss_log(csv)); }

}  // namespace fabtwin
