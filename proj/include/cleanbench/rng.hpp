#pragma once
// Seeded random number generation with portable, branch-stable draw sequences.
// All stochastic components derive their streams from a master seed through
// mix_seed so that replications and series can be generated independently.

#include <cmath>
#include <cstdint>
#include <random>

namespace cleanbench {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Derived stream seed: mix(base, salt) = splitmix64(base ^ splitmix64(salt)).
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt) {
  return splitmix64(base ^ splitmix64(salt));
}

// mt19937_64 core with explicit Box-Muller / inverse-CDF transforms instead of
// std::*_distribution, so draw sequences do not depend on the standard library
// implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  double lognormal(double log_mu, double log_sigma) {
    return std::exp(normal(log_mu, log_sigma));
  }

  // Kumaraswamy(a, b) on [0, 1] by inverse CDF; a beta-like bounded shape.
  double kumaraswamy(double a, double b) {
    const double u = uniform();
    return std::pow(1.0 - std::pow(1.0 - u, 1.0 / b), 1.0 / a);
  }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

 private:
  static constexpr double kPi = 3.14159265358979323846;
  std::mt19937_64 engine_;
};

}  // namespace cleanbench
