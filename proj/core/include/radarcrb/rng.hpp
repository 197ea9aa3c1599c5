#pragma once

#include <complex>
#include <cstdint>
#include <cmath>
#include <random>
#include <vector>

namespace radarcrb {

/// Deterministic substream RNG.
///
/// Every stochastic quantity in the toolkit draws from a stream keyed by the
/// master seed plus a small set of integer labels (experiment point, trial,
/// draw, role). Streams with distinct keys are statistically independent and
/// reproducible regardless of evaluation order or thread count.
///
/// Normal variates use an explicit Box-Muller transform rather than
/// std::normal_distribution, whose output sequence is not pinned by the
/// standard; this keeps results bit-identical across standard libraries.
class RngStream {
 public:
  /// Stream labels. Combine the master seed with up to three substream indices.
  explicit RngStream(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                     std::uint64_t c = 0)
      : engine_(mix(mix(mix(mix(0x9e3779b97f4a7c15ULL ^ seed, 0xa5a5a5a5ULL), a), b), c)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection-free modulo bias is negligible for the small n used here,
    // but keep it exact anyway.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  /// Standard normal pair via Box-Muller.
  std::pair<double, double> normal_pair() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * M_PI * uniform();
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    auto [a, b] = normal_pair();
    spare_ = b;
    have_spare_ = true;
    return a;
  }

  /// Circularly symmetric complex normal with E|g|^2 = 1
  /// (variance 1/2 per real and imaginary part).
  std::complex<double> complex_normal() {
    auto [a, b] = normal_pair();
    return {a * M_SQRT1_2, b * M_SQRT1_2};
  }

  /// Antipodal bit in {-1, +1}.
  int bit() { return (engine_() >> 63) ? 1 : -1; }

 private:
  // SplitMix64 finalizer; decorrelates nearby keys before seeding the engine.
  static std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    h += 0x9e3779b97f4a7c15ULL + v;
    std::uint64_t z = h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace radarcrb
