#pragma once

// Pinned random stream used everywhere a seed appears.
//
// Engine: SplitMix64 (Steele, Lea, Flood 2014). State is a 64-bit counter
// advanced by the golden-ratio increment 0x9E3779B97F4A7C15; every output is
// the counter passed through the finalizer
//     z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//     z ^= z >> 27; z *= 0x94D049BB133111EB;
//     z ^= z >> 31;
// Derived variates are defined here rather than taken from <random> because
// the standard distributions are not specified bit-for-bit:
//   uniform01   = (next() >> 11) * 2^-53                      in [0, 1)
//   normal      = Box-Muller cosine branch on two uniforms, one normal per call
//                 sqrt(-2 ln(1 - u1)) * cos(2 pi u2)
//   below(n)    = Lemire multiply-shift with rejection, unbiased on [0, n)
//   split(tag)  = fresh SplitMix64 seeded with mix(next() ^ mix(tag))

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace qcs {

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

/// Hash-combine two 64-bit values into a new seed.
constexpr std::uint64_t combine_seed(std::uint64_t seed, std::uint64_t value) noexcept {
  return splitmix64_mix(seed + 0x9E3779B97F4A7C15ULL + splitmix64_mix(value));
}

class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return splitmix64_mix(state_);
  }

  double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

  double normal() noexcept {
    const double u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Equiprobable +1 / -1 from the top bit.
  double rademacher() noexcept { return ((*this)() >> 63) ? 1.0 : -1.0; }

  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire, "Fast random integer generation in an interval" (2019).
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  SplitMix64 split(std::uint64_t tag) noexcept { return SplitMix64(splitmix64_mix((*this)() ^ splitmix64_mix(tag))); }

 private:
  std::uint64_t state_;
};

}  // namespace qcs
