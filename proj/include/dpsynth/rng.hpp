#ifndef DPSYNTH_RNG_HPP
#define DPSYNTH_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace dpsynth {

// splitmix64 finalizer; used to combine seeds into independent streams.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seeded random source. All stochastic operations in the library take one of
// these explicitly; there is no ambient global generator. Samplers are
// hand-rolled from raw bits so sequences do not depend on the standard
// library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in {0, ..., n-1}.
  size_t next_index(size_t n) {
    return static_cast<size_t>(next_double() * static_cast<double>(n)) % n;
  }

  // Standard normal via Box-Muller.
  double next_gaussian() {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Laplace(0, scale) via inverse CDF.
  double next_laplace(double scale) {
    const double u = next_double() - 0.5;
    const double sign = u < 0.0 ? -1.0 : 1.0;
    double a = 1.0 - 2.0 * std::abs(u);
    if (a <= 0.0) a = 0x1.0p-53;
    return -scale * sign * std::log(a);
  }

  // Derived generator for an independent stream.
  Rng fork(uint64_t stream) { return Rng(mix_seed(engine_(), stream)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dpsynth

#endif  // DPSYNTH_RNG_HPP
