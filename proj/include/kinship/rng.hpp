#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace kinship {

/// Seeded random source shared by every module that samples.
///
/// The engine is std::mt19937_64 whose output sequence is fixed by the
/// standard; the transforms below are hand-rolled so the stream of draws is
/// identical on every platform (std::*_distribution is implementation
/// defined). Integer draws are bit-portable; normal() is portable up to
/// libm rounding.
class Rng {
 public:
  /// Identifier recorded in sampled artifacts so a run can be reproduced.
  static constexpr const char* kAlgorithm = "mt19937_64-rejection-v1";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound), unbiased via rejection. bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = bound * ((~std::uint64_t{0}) / bound);
    std::uint64_t draw = next_u64();
    while (draw >= limit) draw = next_u64();
    return draw % bound;
  }

  /// Standard normal via Box-Muller; two uniform draws per call, no cache.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Fisher-Yates, back to front.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace kinship
