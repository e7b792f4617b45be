#pragma once

#include <cmath>
#include <cstdint>

namespace pbmt::rng {

// SplitMix64 finalizer. Used both as the stream advance function and as a
// stateless hash so that stochastic faults can be keyed by (seed, step)
// without any shared mutable state.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ splitmix64(value + 0x632be59bd9b4e019ULL));
}

// Uniform in [0, 1) from the top 53 bits of a hash.
inline double to_unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Counter-based draws: pure functions of (seed, counter).
inline double uniform01_at(std::uint64_t seed, std::uint64_t counter) {
  return to_unit(mix(seed, counter));
}

// Standard normal via Box-Muller on two counter-derived uniforms.
inline double normal_at(std::uint64_t seed, std::uint64_t counter) {
  const double u1 = static_cast<double>((mix(seed, 2 * counter) >> 11) + 1) * 0x1.0p-53;  // (0,1]
  const double u2 = to_unit(mix(seed, 2 * counter + 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Small deterministic stream for generators and optimizers.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  double uniform01() { return to_unit(next_u64()); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). n must be positive; modulo bias is
  // negligible for the small n used here.
  int below(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  double normal() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Derive an independent child seed; used to key per-site and per-run
  // streams off one master seed.
  std::uint64_t fork(std::uint64_t salt) { return mix(state_, salt); }

 private:
  std::uint64_t state_;
};

}  // namespace pbmt::rng
