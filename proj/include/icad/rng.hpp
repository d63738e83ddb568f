#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace icad {

// Deterministic random source. All randomness in the project flows through
// this class so that a run is reproducible from a single seed, independent of
// platform library differences (std::normal_distribution is not guaranteed to
// produce the same sequence across standard library implementations, so the
// transforms are done by hand here).
class Rng {
public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Derive an independent stream seed from a base seed and a stream id.
  // Used to give every (batch, item) pair its own generator so that batch
  // assembly can be reordered or parallelized without changing the draws.
  static uint64_t split(uint64_t seed, uint64_t stream) {
    // splitmix64 finalizer over the combined value
    uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int64_t uniform_int(int64_t n) {
    if (n <= 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    // Rejection sampling to avoid modulo bias.
    const uint64_t un = uint64_t(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return int64_t(v % un);
  }

  bool coin() { return (engine_() & 1ull) != 0; }

  // Standard normal via Box-Muller; caches the second value of each pair.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  // Normal restricted to the open interval (-2*sigma, 2*sigma), by resampling.
  double truncated_normal(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("Rng::truncated_normal: sigma must be positive");
    for (;;) {
      const double v = sigma * normal();
      if (std::fabs(v) < 2.0 * sigma) return v;
    }
  }

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace icad
