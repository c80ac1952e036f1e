#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace wgflow {

// Counter-based generator: every variate is a pure function of
// (seed, stream, step, index), so runs are reproducible regardless of the
// order in which particles or runs are evaluated.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(std::uint64_t stream, std::uint64_t step, std::uint64_t index) const {
    std::uint64_t h = mix(seed_ ^ 0x9e3779b97f4a7c15ULL);
    h = mix(h ^ stream);
    h = mix(h ^ step);
    return mix(h ^ index);
  }

  // uniform on the open interval (0, 1)
  double uniform(std::uint64_t stream, std::uint64_t step, std::uint64_t index) const {
    return (static_cast<double>(bits(stream, step, index) >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal(std::uint64_t stream, std::uint64_t step, std::uint64_t index) const {
    // Box-Muller on two decorrelated uniforms drawn from the same counter
    double u1 = uniform(stream, step, 2 * index);
    double u2 = uniform(stream, step, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace wgflow
