#pragma once

#include <cstdint>

namespace bevfuse {

/// Deterministic random stream. Draws are generated from a xoshiro-free
/// splitmix64-seeded engine with hand-rolled transforms so sequences do not
/// depend on standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for (trial, lane) under one master seed. Streams with
  /// distinct (trial, lane) are decorrelated, so trials can run in any order.
  static Rng stream(std::uint64_t master_seed, std::uint64_t trial, std::uint64_t lane);

  std::uint64_t next_u64();

  double uniform01();  // [0, 1)
  double uniform(double lo, double hi);
  double gaussian();  // standard normal (Box-Muller, pair-cached)
  double gaussian(double mean, double stddev);

  /// N(mean, stddev^2) conditioned on [lo, hi] via rejection.
  double truncated_gaussian(double mean, double stddev, double lo, double hi);

 private:
  std::uint64_t state_[4];
  double cached_gauss_{0.0};
  bool has_cached_{false};
};

/// splitmix64 mixing step, also used to derive stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace bevfuse
