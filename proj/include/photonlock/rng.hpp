#pragma once

#include <cstdint>
#include <random>

namespace photonlock {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for stream `stream` of a run seeded with `seed`.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  return mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x5851F42D4C957F2DULL));
}

/// Deterministic random source.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard, and
/// implements its own variate transforms so that draws do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  /// Standard normal variate (Marsaglia polar method).
  double normal();

  /// Poisson variate with the given mean; mean must be finite and >= 0.
  std::int64_t poisson(double mean);

  /// Bernoulli trial with success probability p.
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::int64_t poisson_small(double mean);
  std::int64_t poisson_ptrs(double mean);

  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace photonlock
