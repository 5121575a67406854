// Seeded random number generation with a fixed draw protocol.
//
// std::uniform_real_distribution and std::normal_distribution are
// implementation-defined, so every mapping from raw engine output to a
// double lives here; two builds with the same seed produce the same
// stream of values bit for bit.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace sgcn {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard Box-Muller; consumes exactly two raw draws per call.
  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
    return mean + stddev * r * std::cos(theta);
  }

  /// Uniform integer in [0, bound). bound must be nonzero.
  std::uint64_t below(std::uint64_t bound) {
    // multiply-shift; bias is < 2^-64 per draw, irrelevant at our scales
    const unsigned __int128 wide =
        static_cast<unsigned __int128>(engine_()) * bound;
    return static_cast<std::uint64_t>(wide >> 64);
  }

 private:
  std::mt19937_64 engine_;
};

/// Fisher-Yates with the fixed draw protocol above.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace sgcn
