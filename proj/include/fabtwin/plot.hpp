#pragma once

#include <filesystem>
#include <vector>

#include "fabtwin/image.hpp"
#include "fabtwin/png.hpp"
#include "fabtwin/training.hpp"

namespace fabtwin {

/// Colour scale for heatmaps: auto divides by the map maximum, fixed by a
/// caller-chosen ceiling so panels can be compared.
struct HeatmapScale {
  bool automatic = true;
  double max = 0.25;

  static HeatmapScale auto_max() { return {true, 0.0}; }
  static HeatmapScale fixed(double max) { return {false, max}; }
};

/// Palette PNG at the map's resolution. Index 255 (the hottest colour) is
/// reached only by values at or above the scale maximum; an all-zero map
/// renders as uniform background.
Bytes render_heatmap(const GrayImage& map, HeatmapScale scale = HeatmapScale::auto_max());

struct LossCharts {
  Bytes totals;  // loss_D and loss_G_total vs step
  Bytes terms;   // loss_G_gan and loss_G_l1 vs step
};

/// Two line charts, each series on its own y axis (left and right).
LossCharts plot_loss_curves(const std::vector<LossRecord>& log);
/// Reads the CSV first; malformed rows or missing columns throw InvalidInput.
LossCharts plot_loss_curves(const std::filesystem::path& csv);

}  // namespace fabtwin
