#pragma once

#include <complex>
#include <vector>

#include "radarcrb/geometry.hpp"
#include "radarcrb/rng.hpp"

namespace radarcrb {

/// GMSK burst description shared by all transmitters. Transmitter m
/// (0-based) is additionally offset in frequency by (m+1) * freq_offset_hz.
struct GmskParams {
  double bit_duration_s = 577e-6;  ///< Tp
  double bt_product = 0.3;         ///< 3 dB bandwidth of the Gaussian filter times Tp
  int num_bits = 16;               ///< Nc
  int oversampling = 4;            ///< samples per bit
  double freq_offset_hz = 300.0;   ///< inter-transmitter frequency spacing
  double carrier_hz = 900e6;       ///< fc, defines the wavelength

  int samples() const { return num_bits * oversampling; }  ///< K
  double sample_interval_s() const { return bit_duration_s / oversampling; }  ///< Ts
  double duration_s() const { return num_bits * bit_duration_s; }
  double wavelength_m() const { return kSpeedOfLight / carrier_hz; }

  /// Throws std::invalid_argument on a violated field constraint.
  void validate() const;
};

/// Tabulated GMSK phase pulse: the frequency pulse z(t) (Gaussian-filtered
/// rectangle, symmetric about Tp/2, area pi/2) and its running integral
/// q(t) -> pi/2. Nodes carry both q and exact z values; evaluation is a C^1
/// cubic Hermite interpolant, so phase() and phase_rate() are consistent
/// derivatives of one another by construction. Immutable and shareable.
class PhasePulse {
 public:
  /// Tabulates q by adaptive quadrature of z on a grid of step
  /// bit_duration/256, truncated where |z| < 1e-12.
  static PhasePulse build(const GmskParams& params);

  /// Running phase integral; clamps to 0 / total() outside the table.
  double q(double t) const;
  /// Time derivative of the interpolated q (approximates z to table accuracy).
  double q_rate(double t) const;
  /// Analytic frequency pulse z(t), independent of the table.
  double z_exact(double t) const;

  double total() const { return q_nodes_.back(); }  ///< q at the right edge, ~pi/2
  double grid_step() const { return step_; }
  double support_begin() const { return t0_; }
  double support_end() const { return t0_ + step_ * (static_cast<double>(q_nodes_.size()) - 1); }

 private:
  PhasePulse() = default;

  double t0_ = 0.0;
  double step_ = 0.0;
  double bit_duration_ = 0.0;
  double gauss_rate_ = 0.0;  // 2*pi*B/sqrt(ln 2)
  std::vector<double> q_nodes_;
  std::vector<double> z_nodes_;
};

/// Antipodal bits, one sequence of length Nc per transmitter.
using BitSequence = std::vector<int>;

/// Independent equiprobable +-1 bits for all transmitters.
std::vector<BitSequence> random_bits(RngStream& rng, int num_tx, int num_bits);

/// A realized burst: phase pulse, bits, and per-transmitter normalization
/// A_m making sum_k |s_m(k Ts)|^2 Ts = 1 over the k = 1..K sample grid.
/// Sampling is pure and thread-safe.
class GmskWaveform {
 public:
  GmskWaveform(GmskParams params, std::vector<BitSequence> bits);

  const GmskParams& params() const { return params_; }
  const PhasePulse& pulse() const { return pulse_; }
  int num_tx() const { return static_cast<int>(bits_.size()); }
  double amplitude(int tx) const { return amplitude_.at(tx); }
  const std::vector<BitSequence>& bits() const { return bits_; }

  /// Baseband sample s_m(t) = A_m exp(j [sum_i c_mi q(t - i Tp)]) *
  /// exp(j 2 pi (m+1) freq_offset t) for any real t.
  std::complex<double> sample(int tx, double t) const;

  /// ds_m/dt = j [sum_i c_mi q_rate(t - i Tp) + 2 pi (m+1) freq_offset] s_m(t).
  std::complex<double> sample_time_derivative(int tx, double t) const;

 private:
  double phase(int tx, double t) const;
  double phase_rate(int tx, double t) const;

  GmskParams params_;
  PhasePulse pulse_;
  std::vector<BitSequence> bits_;
  std::vector<double> amplitude_;
};

}  // namespace radarcrb
