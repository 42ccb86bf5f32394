#pragma once

#include <cstdint>

// Counter-based deterministic random numbers.
//
// Every draw is a pure function of (seed, counter): there is no sequential
// stream state, so the value of a draw cannot depend on evaluation order or
// thread count. The mixing function is the SplitMix64 finalizer applied to
// seed + (counter + 1) * golden-ratio increment. The algorithm is frozen;
// golden-value tests pin the exact outputs.

namespace biterr::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer (Steele, Lea, Flood 2014).
inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

// Keyed draw: 64 uniform bits at (seed, counter).
inline constexpr std::uint64_t at(std::uint64_t seed, std::uint64_t counter) noexcept {
  return mix64(seed + (counter + 1) * kGolden);
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::uint64_t seed, std::uint64_t counter) noexcept {
  return static_cast<double>(at(seed, counter) >> 11) * 0x1.0p-53;
}

// Sequential stream for places where ordered draws are natural
// (weight init, shuffles, noise). Still fully determined by its seed.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }
  double next_unit() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  // Uniform in [lo, hi).
  double next_in(double lo, double hi) noexcept { return lo + (hi - lo) * next_unit(); }
  // Uniform integer in [0, n). Modulo bias is < 2^-50 for any n we use.
  std::uint64_t next_below(std::uint64_t n) noexcept { return next() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace biterr::rng
