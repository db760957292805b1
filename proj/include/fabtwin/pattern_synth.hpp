#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fabtwin/image.hpp"
#include "fabtwin/rng.hpp"

namespace fabtwin {

enum class AmplitudeLaw { Uniform, Gaussian };

/// Parameters of the band-limited random pattern generator.
/// Frequencies are in cycles per image.
struct SynthSpec {
  int size = 64;
  double passband_low = 2.0;
  double passband_high = 8.0;
  AmplitudeLaw amplitude_law = AmplitudeLaw::Uniform;
  double fill_target = 0.5;
  int min_feature_px = 4;
  int cleanup_iterations = 1;

  /// Throws InvalidSpec.
  void validate() const;
};

nlohmann::json to_json(const SynthSpec& s);
SynthSpec synth_spec_from_json(const nlohmann::json& j);

/// Random layout: Hermitian random spectrum on the passband annulus,
/// inverse transform, quantile threshold at fill_target, then
/// `cleanup_iterations` rounds of morphological open-then-close with a disk of
/// radius ceil(min_feature_px / 2).
BitMask synth_fourier_pattern(const SynthSpec& spec, RngSeed seed);

/// Real field before thresholding; exposed for tests.
std::vector<double> synth_fourier_field(const SynthSpec& spec, RngSeed seed);

// Morphology with a Euclidean disk {dx^2 + dy^2 <= r^2}. Offsets that fall
// outside the image are ignored, so the image border is not a feature edge.
BitMask erode(const BitMask& m, int radius);
BitMask dilate(const BitMask& m, int radius);
BitMask morph_open(const BitMask& m, int radius);
BitMask morph_close(const BitMask& m, int radius);

/// 4-connected foreground components, labelled 1..n (0 = background).
std::vector<int> label_components(const BitMask& m, int* count = nullptr);

enum class StructureKind { Cross25, Cross50, Cross100, Square, Target50, Target100 };

StructureKind parse_structure_kind(std::string_view name);
std::string to_string(StructureKind kind);

/// Geometry of the evaluation structures. Defaults describe the 1 nm/px
/// layouts inside a 200 px region; `scaled` shrinks every length for
/// low-resolution experiments.
struct StructureGeometry {
  int canvas_px = 256;
  int region_px = 200;
  int narrow_arm_px = 25;
  int medium_arm_px = 50;
  int wide_arm_px = 100;
  int square_side_px = 100;
  int target_arm_len_px = 120;
  int target_ring_px = 25;

  /// Every length multiplied by `factor` and floored; canvas replaced.
  StructureGeometry scaled(double factor, int canvas) const;
  /// Arm width for crosses and targets, 0 for the square.
  int arm_width(StructureKind kind) const;
};

/// Centered evaluation layout. Cross-w: 200 x w horizontal bar union w x 200
/// vertical bar. Square: filled square. Target-w: cross of arm width w and
/// length target_arm_len inside a concentric square ring of outer side
/// region_px and thickness target_ring_px.
BitMask make_eval_structure(StructureKind kind, const StructureGeometry& geom = {});

/// Centered cross of the given bar length and width.
BitMask make_cross(int canvas, int length, int width);

/// [identity, rot90, rot180, rot270] applied to both elements.
std::vector<std::pair<BitMask, BitMask>> augment_rotations(const std::pair<BitMask, BitMask>& pair);

}  // namespace fabtwin
