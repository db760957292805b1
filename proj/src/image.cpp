#include "fabtwin/image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fabtwin/error.hpp"

namespace fabtwin {

namespace {

void check_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw InvalidInput("image dimensions must be >= 1, got " + std::to_string(width) + "x" +
                       std::to_string(height));
  }
}

}  // namespace

BitMask::BitMask(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  check_dims(width, height);
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill ? 1 : 0);
}

BitMask::BitMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  check_dims(width, height);
  if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InvalidInput("bit count does not match width x height");
  }
  for (auto b : bits_) {
    if (b > 1) throw InvalidInput("BitMask values must be 0 or 1");
  }
}

std::size_t BitMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

GrayImage::GrayImage(int width, int height, float fill) : width_(width), height_(height) {
  check_dims(width, height);
  if (!std::isfinite(fill) || fill < 0.0f || fill > 1.0f) throw InvalidInput("gray fill outside [0,1]");
  values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<float> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_dims(width, height);
  if (values_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InvalidInput("value count does not match width x height");
  }
  for (float v : values_) {
    if (!std::isfinite(v)) throw InvalidInput("non-finite pixel value");
    if (v < 0.0f || v > 1.0f) throw InvalidInput("gray value outside [0,1]");
  }
}

GrayImage GrayImage::from_mask(const BitMask& mask) {
  std::vector<float> v(mask.size());
  std::transform(mask.bits().begin(), mask.bits().end(), v.begin(),
                 [](std::uint8_t b) { return b ? 1.0f : 0.0f; });
  return GrayImage(mask.width(), mask.height(), std::move(v));
}

void GrayImage::set(int x, int y, float v) {
  if (!std::isfinite(v)) throw InvalidInput("non-finite pixel value");
  values_[index(x, y)] = std::clamp(v, 0.0f, 1.0f);
}

double GrayImage::mean() const {
  if (values_.empty()) return 0.0;
  double s = std::accumulate(values_.begin(), values_.end(), 0.0);
  return s / static_cast<double>(values_.size());
}

BitMask binarize(const GrayImage& image, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidInput("threshold must lie in (0,1)");
  std::vector<std::uint8_t> bits(image.size());
  auto vals = image.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (!std::isfinite(vals[i])) throw InvalidInput("non-finite pixel value");
    bits[i] = static_cast<double>(vals[i]) >= threshold ? 1 : 0;
  }
  return BitMask(image.width(), image.height(), std::move(bits));
}

BitMask rotate90(const BitMask& mask) {
  const int w = mask.width(), h = mask.height();
  BitMask out(h, w);
  for (int y = 0; y < w; ++y)
    for (int x = 0; x < h; ++x) out.set(x, y, mask(y, h - 1 - x));
  return out;
}

GrayImage rotate90(const GrayImage& image) {
  const int w = image.width(), h = image.height();
  GrayImage out(h, w);
  for (int y = 0; y < w; ++y)
    for (int x = 0; x < h; ++x) out.set(x, y, image(y, h - 1 - x));
  return out;
}

BitMask shift(const BitMask& mask, int dx, int dy) {
  BitMask out(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y) {
    const int sy = y - dy;
    if (sy < 0 || sy >= mask.height()) continue;
    for (int x = 0; x < mask.width(); ++x) {
      const int sx = x - dx;
      if (sx < 0 || sx >= mask.width()) continue;
      if (mask(sx, sy)) out.set(x, y, true);
    }
  }
  return out;
}

bool same_dims(const BitMask& a, const BitMask& b) {
  return a.width() == b.width() && a.height() == b.height();
}

}  // namespace fabtwin
