#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fabtwin/image.hpp"

namespace fabtwin {

using Bytes = std::vector<std::uint8_t>;

/// 8-bit grayscale PNG, 0 -> 0 and 1 -> 255.
Bytes encode_mask(const BitMask& mask);
/// Accepts only 8-bit grayscale, non-interlaced PNG. Pixel >= 128 -> 1.
BitMask decode_mask(std::span<const std::uint8_t> png);

/// Gray values stored as round(v * 255).
Bytes encode_gray(const GrayImage& image);
GrayImage decode_gray(std::span<const std::uint8_t> png);

using Rgb = std::array<std::uint8_t, 3>;

/// Palette-indexed PNG (colour type 3): one index byte per pixel.
Bytes encode_indexed(int width, int height, std::span<const std::uint8_t> indices,
                     std::span<const Rgb> palette);

struct IndexedImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> indices;
  std::vector<Rgb> palette;
};

/// 8-bit palette PNG back to indices; used to inspect rendered charts.
IndexedImage decode_indexed(std::span<const std::uint8_t> png);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

BitMask load_mask(const std::filesystem::path& path);
void save_mask(const std::filesystem::path& path, const BitMask& mask);
GrayImage load_gray(const std::filesystem::path& path);
void save_gray(const std::filesystem::path& path, const GrayImage& image);

}  // namespace fabtwin
