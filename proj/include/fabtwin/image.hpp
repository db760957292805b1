#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace fabtwin {

/// Binary raster, row-major, 1 = material present.
class BitMask {
 public:
  BitMask() = default;
  BitMask(int width, int height, std::uint8_t fill = 0);
  BitMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }
  bool empty() const { return bits_.empty(); }

  std::uint8_t operator()(int x, int y) const { return bits_[index(x, y)]; }
  void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::size_t count() const;

  bool operator==(const BitMask&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Real-valued raster with values in [0,1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, float fill = 0.0f);
  /// Throws InvalidInput if any value is non-finite or outside [0,1].
  GrayImage(int width, int height, std::vector<float> values);

  static GrayImage from_mask(const BitMask& mask);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return values_.size(); }

  float operator()(int x, int y) const { return values_[index(x, y)]; }
  /// Clamps into [0,1].
  void set(int x, int y, float v);

  std::span<const float> values() const { return values_; }
  double mean() const;

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> values_;
};

/// Discrete distribution over uniform bins on [0,1].
struct Histogram {
  std::vector<double> bin_edges;  // bin_count + 1 entries
  std::vector<double> mass;

  int bin_count() const { return static_cast<int>(mass.size()); }
  double bin_width() const { return bin_edges.empty() ? 0.0 : bin_edges[1] - bin_edges[0]; }
  bool same_binning(const Histogram& other) const { return bin_edges == other.bin_edges; }
};

/// bit = 1 iff value >= threshold.
BitMask binarize(const GrayImage& image, double threshold = 0.5);

/// Clockwise quarter turn: out(x, y) = in(y, H-1-x).
BitMask rotate90(const BitMask& mask);
GrayImage rotate90(const GrayImage& image);

/// Integer translation with zero fill: out(x, y) = in(x - dx, y - dy).
BitMask shift(const BitMask& mask, int dx, int dy);

bool same_dims(const BitMask& a, const BitMask& b);

}  // namespace fabtwin
