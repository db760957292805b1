#include "fabtwin/rng.hpp"

#include <cmath>
#include <numbers>

#include "fabtwin/error.hpp"

namespace fabtwin {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64_mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

RngSeed RngSeed::child(std::string_view label, std::uint64_t index) const {
  // base depends on (seed, label); the index enters through an odd-multiplier
  // increment followed by a bijective finalizer, hence injectivity in index.
  const std::uint64_t base = splitmix64_mix(value ^ splitmix64_mix(fnv1a64(label)));
  return RngSeed(splitmix64_mix(base + (index + 1) * 0x9e3779b97f4a7c15ULL));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw InvalidInput("uniform_index: empty range");
  if (n == 1) return 0;
  const unsigned __int128 prod = static_cast<unsigned __int128>(engine_()) * n;
  return static_cast<std::uint64_t>(prod >> 64);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

}  // namespace fabtwin
