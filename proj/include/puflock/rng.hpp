#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace puflock {

inline constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ULL;

/// splitmix64 finalizer: bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

/// Deterministic splitmix64 stream. Every seeded draw in the library goes
/// through this type so results never depend on standard-library internals.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += kGolden64;
    return mix64(state_);
  }

  /// Uniform in [0, bound), bias-free via rejection. bound must be nonzero.
  std::uint64_t next_below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

  /// Uniform in [0, 1), 53 random bits.
  double next_double() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes two uniforms per draw.
  double next_normal() noexcept {
    const double u1 = 1.0 - next_double();  // (0, 1], keeps log() finite
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace puflock
