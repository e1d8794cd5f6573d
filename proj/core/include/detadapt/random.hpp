#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace detadapt {

// Mixes a master seed with a path of stream identifiers (SplitMix64 finalizer).
// Every consumer of randomness derives its own stream this way, so results do
// not depend on evaluation order.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

// Thin wrapper over mt19937_64 with distribution transforms written out
// explicitly. The standard distributions are implementation-defined, which
// would break byte-identical outputs across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi] (inclusive), unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal (Box-Muller, no cached second value).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Knuth's multiplication method; fine for the small rates used here.
  int poisson(double lambda);

 private:
  std::mt19937_64 engine_;
};

}  // namespace detadapt
