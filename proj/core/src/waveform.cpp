#include "radarcrb/waveform.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace radarcrb {

namespace {

constexpr double kZTruncation = 1e-12;
constexpr int kNodesPerBit = 256;

/// Standard normal upper tail.
double gauss_tail(double x) { return 0.5 * std::erfc(x * M_SQRT1_2); }

/// Recursive adaptive Simpson on [a, b] with whole-interval estimate s.
double adaptive_simpson(const std::function<double(double)>& f, double a, double fa, double b,
                        double fb, double fm, double s, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double h = b - a;
  const double sl = h / 12.0 * (fa + 4.0 * flm + fm);
  const double sr = h / 12.0 * (fm + 4.0 * frm + fb);
  const double s2 = sl + sr;
  if (depth <= 0 || std::abs(s2 - s) <= 15.0 * tol) {
    return s2 + (s2 - s) / 15.0;
  }
  return adaptive_simpson(f, a, fa, m, fm, flm, sl, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, fm, b, fb, frm, sr, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double s = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, fa, b, fb, fm, s, tol, 24);
}

}  // namespace

void GmskParams::validate() const {
  if (!(bit_duration_s > 0.0)) throw std::invalid_argument("bit_duration must be positive");
  if (!(bt_product > 0.0)) throw std::invalid_argument("bt_product must be positive");
  if (num_bits < 1) throw std::invalid_argument("num_bits must be at least 1");
  if (oversampling < 1) throw std::invalid_argument("oversampling must be at least 1");
  if (!(carrier_hz > 0.0)) throw std::invalid_argument("carrier frequency must be positive");
  if (freq_offset_hz < 0.0) throw std::invalid_argument("freq_offset must be nonnegative");
}

double PhasePulse::z_exact(double t) const {
  // z(t) = pi/(2 Tp) * [tail(a (t - Tp)) - tail(a t)], a = 2 pi B / sqrt(ln 2).
  const double scale = M_PI / (2.0 * bit_duration_);
  return scale * (gauss_tail(gauss_rate_ * (t - bit_duration_)) - gauss_tail(gauss_rate_ * t));
}

PhasePulse PhasePulse::build(const GmskParams& params) {
  params.validate();
  PhasePulse p;
  p.bit_duration_ = params.bit_duration_s;
  const double bandwidth = params.bt_product / params.bit_duration_s;
  p.gauss_rate_ = 2.0 * M_PI * bandwidth / std::sqrt(std::log(2.0));
  p.step_ = params.bit_duration_s / kNodesPerBit;

  // Symmetric grid about the pulse center Tp/2; extend until |z| < 1e-12 at
  // the edges (at least 4 bit durations of half-width).
  const double center = 0.5 * params.bit_duration_s;
  long jmax = std::lround(std::ceil(4.5 * kNodesPerBit));
  while (std::abs(p.z_exact(center + static_cast<double>(jmax) * p.step_)) >= kZTruncation ||
         std::abs(p.z_exact(center - static_cast<double>(jmax) * p.step_)) >= kZTruncation) {
    jmax += kNodesPerBit;
  }

  const long count = 2 * jmax + 1;
  p.t0_ = center - static_cast<double>(jmax) * p.step_;
  p.q_nodes_.resize(count);
  p.z_nodes_.resize(count);
  const auto z = [&p](double t) { return p.z_exact(t); };
  double acc = 0.0;
  p.q_nodes_[0] = 0.0;
  p.z_nodes_[0] = p.z_exact(p.t0_);
  for (long j = 1; j < count; ++j) {
    const double a = p.t0_ + (j - 1) * p.step_;
    const double b = p.t0_ + j * p.step_;
    acc += integrate(z, a, b, 1e-16);
    p.q_nodes_[j] = acc;
    p.z_nodes_[j] = p.z_exact(b);
  }
  return p;
}

double PhasePulse::q(double t) const {
  const double s = (t - t0_) / step_;
  if (s <= 0.0) return 0.0;
  const double last = static_cast<double>(q_nodes_.size()) - 1.0;
  if (s >= last) return q_nodes_.back();
  const long i = static_cast<long>(s);
  const double u = s - static_cast<double>(i);
  const double u2 = u * u, u3 = u2 * u;
  const double h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
  const double h10 = u3 - 2.0 * u2 + u;
  const double h01 = -2.0 * u3 + 3.0 * u2;
  const double h11 = u3 - u2;
  return h00 * q_nodes_[i] + h01 * q_nodes_[i + 1] +
         step_ * (h10 * z_nodes_[i] + h11 * z_nodes_[i + 1]);
}

double PhasePulse::q_rate(double t) const {
  const double s = (t - t0_) / step_;
  const double last = static_cast<double>(q_nodes_.size()) - 1.0;
  if (s <= 0.0 || s >= last) return 0.0;
  const long i = static_cast<long>(s);
  const double u = s - static_cast<double>(i);
  const double u2 = u * u;
  const double d00 = 6.0 * u2 - 6.0 * u;
  const double d10 = 3.0 * u2 - 4.0 * u + 1.0;
  const double d01 = -d00;
  const double d11 = 3.0 * u2 - 2.0 * u;
  return (d00 * q_nodes_[i] + d01 * q_nodes_[i + 1]) / step_ + d10 * z_nodes_[i] +
         d11 * z_nodes_[i + 1];
}

std::vector<BitSequence> random_bits(RngStream& rng, int num_tx, int num_bits) {
  std::vector<BitSequence> bits(num_tx);
  for (auto& seq : bits) {
    seq.resize(num_bits);
    for (auto& b : seq) b = rng.bit();
  }
  return bits;
}

GmskWaveform::GmskWaveform(GmskParams params, std::vector<BitSequence> bits)
    : params_(params), pulse_(PhasePulse::build(params)), bits_(std::move(bits)) {
  if (bits_.empty()) throw std::invalid_argument("waveform needs at least one bit sequence");
  for (const auto& seq : bits_) {
    if (static_cast<int>(seq.size()) != params_.num_bits) {
      throw std::invalid_argument("bit sequence length must equal num_bits");
    }
    for (int b : seq) {
      if (b != 1 && b != -1) throw std::invalid_argument("bits must be +-1");
    }
  }

  // Per-transmitter normalization over the k = 1..K sample grid.
  const int k_total = params_.samples();
  const double ts = params_.sample_interval_s();
  amplitude_.resize(bits_.size());
  for (int m = 0; m < num_tx(); ++m) {
    double energy = 0.0;
    for (int k = 1; k <= k_total; ++k) {
      const double ph = phase(m, k * ts);
      const double re = std::cos(ph), im = std::sin(ph);
      energy += (re * re + im * im) * ts;
    }
    amplitude_[m] = 1.0 / std::sqrt(energy);
  }
}

double GmskWaveform::phase(int tx, double t) const {
  const auto& seq = bits_[tx];
  const double tp = params_.bit_duration_s;
  double acc = 0.0;
  for (int i = 1; i <= params_.num_bits; ++i) {
    acc += seq[i - 1] * pulse_.q(t - i * tp);
  }
  return acc + 2.0 * M_PI * (tx + 1) * params_.freq_offset_hz * t;
}

double GmskWaveform::phase_rate(int tx, double t) const {
  const auto& seq = bits_[tx];
  const double tp = params_.bit_duration_s;
  double acc = 0.0;
  for (int i = 1; i <= params_.num_bits; ++i) {
    acc += seq[i - 1] * pulse_.q_rate(t - i * tp);
  }
  return acc + 2.0 * M_PI * (tx + 1) * params_.freq_offset_hz;
}

std::complex<double> GmskWaveform::sample(int tx, double t) const {
  const double ph = phase(tx, t);
  return amplitude_[tx] * std::complex<double>(std::cos(ph), std::sin(ph));
}

std::complex<double> GmskWaveform::sample_time_derivative(int tx, double t) const {
  return std::complex<double>(0.0, phase_rate(tx, t)) * sample(tx, t);
}

}  // namespace radarcrb
