#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fabtwin {

/// 64-bit seed with a stable derivation rule for independent sub-streams.
struct RngSeed {
  std::uint64_t value = 0;

  constexpr RngSeed() = default;
  constexpr explicit RngSeed(std::uint64_t v) : value(v) {}

  /// Child seed for item `index` of stream `label`. Stable across platforms
  /// and runs; for a fixed (seed, label) the map index -> child is a bijection
  /// on 64-bit integers, so distinct indices never collide.
  RngSeed child(std::string_view label, std::uint64_t index) const;

  bool operator==(const RngSeed&) const = default;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64_mix(std::uint64_t x);

/// Seeded generator. Uses the standard Mersenne Twister engine; the
/// distribution transforms are spelled out here because the standard
/// library's distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(RngSeed seed) : engine_(seed.value) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n); n = 0 throws InvalidInput.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fabtwin
