#include "bevfuse/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace bevfuse {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
  // xoshiro256** state filled from splitmix64 of the seed
  std::uint64_t s = seed;
  for (auto& word : state_) {
    s += 0x9e3779b97f4a7c15ULL;
    word = mix_seed(s);
  }
}

Rng Rng::stream(std::uint64_t master_seed, std::uint64_t trial, std::uint64_t lane) {
  const std::uint64_t mixed =
      mix_seed(master_seed) ^ mix_seed(trial * 0xd1342543de82ef95ULL + 1) ^
      mix_seed(lane * 0x2545f4914f6cdd1dULL + 2);
  return Rng(mixed);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::gaussian() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_gauss_;
  }
  // Box-Muller; u1 in (0, 1] to keep the log finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * M_PI * u2;
  cached_gauss_ = r * std::sin(phi);
  has_cached_ = true;
  return r * std::cos(phi);
}

double Rng::gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

double Rng::truncated_gaussian(double mean, double stddev, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("truncated_gaussian: lo > hi");
  if (stddev == 0.0) {
    if (mean < lo) return lo;
    if (mean > hi) return hi;
    return mean;
  }
  for (;;) {
    const double v = gaussian(mean, stddev);
    if (v >= lo && v <= hi) return v;
  }
}

}  // namespace bevfuse
