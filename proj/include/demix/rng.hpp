#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>

namespace demix {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// splitmix64 step (Steele/Lea/Flood). Advances `state` and returns the
// mixed output.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t splitmix64_hash(std::uint64_t x) {
  std::uint64_t s = x;
  return splitmix64(s);
}

// Keyed seed derivation so that parallel trials get independent streams
// that do not depend on scheduling order.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a,
                              std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64_hash(base);
  h = splitmix64_hash(h ^ a);
  h = splitmix64_hash(h ^ b);
  h = splitmix64_hash(h ^ c);
  return h;
}

// Deterministic variate source. The engine (mt19937_64) is bit-exact across
// platforms; the variate transforms are written out explicitly because the
// std::*_distribution mappings are implementation-defined and the sampling
// contract here is bit-identical output for identical seeds.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // uniform on [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // e^{j 2 pi u}, u uniform
  std::complex<double> unit_circle() {
    return std::polar(1.0, two_pi * uniform());
  }

  // standard complex Gaussian: re and im ~ N(0, 1/2), so E|z|^2 = 1
  std::complex<double> complex_gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double r = std::sqrt(-std::log(u1));
    return std::polar(r, two_pi * uniform());
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace demix
