#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace captrack {

// SplitMix64 (Steele, Lea & Flood 2014). Every random draw in the project goes
// through this generator and the transforms below, so generated data is
// identical across compilers and standard libraries.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed from a base seed and a list of tags.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = seed;
  for (std::uint64_t tag : tags) {
    SplitMix64 mix(h ^ (tag * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL));
    h = mix();
  }
  SplitMix64 mix(h);
  return mix();
}

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(SplitMix64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(SplitMix64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller, cosine branch only: each draw consumes exactly two uniforms.
inline double standard_normal(SplitMix64& rng) {
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double normal(SplitMix64& rng, double sigma) {
  return sigma * standard_normal(rng);
}

// Uniform integer in [0, n) by rejection (no modulo bias).
inline std::uint64_t uniform_index(SplitMix64& rng, std::uint64_t n) {
  const std::uint64_t limit = SplitMix64::max() - SplitMix64::max() % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

}  // namespace captrack
