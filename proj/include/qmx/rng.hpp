#pragma once

#include <cstdint>
#include <random>

namespace qmx {

/// Explicitly seeded random stream with a documented draw contract:
/// uniform() consumes exactly one engine step, so the number of engine
/// steps per simulated round is fixed and runs are reproducible.
/// child(k) derives an independent stream for parallel trials.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), eng_(seed) {}

  /// Uniform double in [0, 1) with 53-bit resolution; one engine step.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi); one engine step.
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::uint64_t seed() const { return seed_; }

  RandomStream child(std::uint64_t index) const {
    return RandomStream(mix(seed_ + (index + 1) * 0x9E3779B97F4A7C15ull));
  }

 private:
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 eng_;
};

}  // namespace qmx
