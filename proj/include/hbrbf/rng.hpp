#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace hbrbf {

// Deterministic counter-based generator: output k is a pure function of
// (seed, k), so any subsequence can be regenerated independently of draw
// order and the same stream is reproduced on every platform with IEEE
// doubles. The construction is the SplitMix64 sequence (Steele, Lea &
// Flood 2014): output k = finalizer(seed + (k+1) * 0x9E3779B97F4A7C15),
// with the standard murmur-style 64-bit finalizer below.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(std::uint64_t counter) const {
    std::uint64_t z = seed_ + (counter + 1) * 0x9E3779B97F4A7C15ull;
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  // Standard normal pair by Box-Muller from counters (c, c+1). The log
  // argument 1-u lies in (0, 1], so the transform never sees log(0).
  std::pair<double, double> normal_pair(std::uint64_t counter) const {
    const double u1 = uniform(counter);
    const double u2 = uniform(counter + 1);
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double theta = 2.0 * M_PI * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

 private:
  std::uint64_t seed_;
};

}  // namespace hbrbf
