#ifndef PRUNEKIT_RNG_HPP_
#define PRUNEKIT_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace prunekit {

// Deterministic random source. The mt19937_64 engine produces the same
// bit stream on every conforming implementation; the variate transforms
// are spelled out here because std::*_distribution output is
// implementation-defined and runs must be byte-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; consumes two draws per variate.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t bounded(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[bounded(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Stateless seed mixer for deriving per-phase substreams from one run seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace prunekit

#endif  // PRUNEKIT_RNG_HPP_
