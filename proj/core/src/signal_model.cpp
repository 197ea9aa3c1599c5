#include "radarcrb/signal_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radarcrb {

namespace {

using Cplx = std::complex<double>;

/// Separation angle at the target between the directions to two stations.
double separation_angle(const Eigen::Vector2d& target, const Eigen::Vector2d& s1,
                        const Eigen::Vector2d& s2) {
  const Eigen::Vector2d u1 = (s1 - target).normalized();
  const Eigen::Vector2d u2 = (s2 - target).normalized();
  const double c = std::clamp(u1.dot(u2), -1.0, 1.0);
  return std::acos(c);
}

double decay_weight(double decay, double distance) {
  if (distance <= 0.0) return 1.0;
  if (!std::isfinite(decay)) return 0.0;
  return std::exp(-decay * distance);
}

}  // namespace

void Scenario::validate() const {
  if (layout.num_tx() < 1 || layout.num_rx() < 1) {
    throw std::invalid_argument("scenario needs at least one transmitter and one receiver");
  }
  gmsk.validate();
  if (tx_energy.size() != 1 && tx_energy.size() != num_tx()) {
    throw std::invalid_argument("tx_energy must have one entry or one per transmitter");
  }
  if ((tx_energy.array() <= 0.0).any()) {
    throw std::invalid_argument("transmit energies must be positive");
  }
  if (!(path_gain > 0.0)) throw std::invalid_argument("path gain must be positive");
  if (reflection.sigma2.size() != 1 && reflection.sigma2.size() != num_paths()) {
    throw std::invalid_argument("reflection sigma2 must have one entry or one per path");
  }
  if ((reflection.sigma2.array() <= 0.0).any()) {
    throw std::invalid_argument("reflection variances must be positive");
  }
  if (std::isnan(reflection.angle_decay) || reflection.angle_decay < 0.0) {
    throw std::invalid_argument("reflection angle decay must be nonnegative (inf allowed)");
  }
  if (std::isnan(noise.distance_decay) || noise.distance_decay < 0.0) {
    throw std::invalid_argument("noise distance decay must be nonnegative (inf allowed)");
  }
  if (!std::isfinite(scnr_db)) throw std::invalid_argument("scnr_db must be finite");
}

SignalPerturbation SignalPerturbation::draw(RngStream& rng, int samples, int paths,
                                            double variance) {
  if (variance < 0.0) throw std::invalid_argument("perturbation variance must be nonnegative");
  SignalPerturbation p;
  p.noise.resize(samples, paths);
  const double scale = std::sqrt(variance);
  for (int c = 0; c < paths; ++c) {
    for (int k = 0; k < samples; ++k) {
      p.noise(k, c) = scale * rng.complex_normal();
    }
  }
  return p;
}

SteeringSet build_steering(const GmskWaveform& waveform, const Scenario& scenario,
                           const IntermediateParams& params,
                           const SignalPerturbation* perturbation) {
  scenario.validate();
  const int m_tx = scenario.num_tx();
  const int n_rx = scenario.num_rx();
  const int k_total = scenario.gmsk.samples();
  if (waveform.num_tx() != m_tx) {
    throw std::invalid_argument("waveform transmitter count does not match scenario");
  }
  if (params.num_paths() != m_tx * n_rx || params.range_tx_m.size() != m_tx ||
      params.range_rx_m.size() != n_rx) {
    throw std::invalid_argument("intermediate parameter sizes do not match scenario");
  }
  if (perturbation && (perturbation->noise.rows() != k_total ||
                       perturbation->noise.cols() != m_tx * n_rx)) {
    throw std::invalid_argument("perturbation table has wrong shape");
  }

  const double ts = scenario.gmsk.sample_interval_s();
  const int nm = m_tx * n_rx;
  const int dim = n_rx * k_total;

  SteeringSet set;
  set.num_tx = m_tx;
  set.num_rx = n_rx;
  set.samples = k_total;
  set.params = params;
  set.amplitude.resize(nm);
  set.s = Eigen::MatrixXcd::Zero(dim, nm);
  set.s_delay = Eigen::MatrixXcd::Zero(dim, nm);
  set.s_doppler = Eigen::MatrixXcd::Zero(dim, nm);
  set.s_range_tx = Eigen::MatrixXcd::Zero(dim, nm);
  set.s_range_rx = Eigen::MatrixXcd::Zero(dim, nm);

  for (int n = 0; n < n_rx; ++n) {
    for (int m = 0; m < m_tx; ++m) {
      const int c = m_tx * n + m;
      const double d_t = params.range_tx_m(m);
      const double d_r = params.range_rx_m(n);
      if (d_t <= kColocationRadiusM || d_r <= kColocationRadiusM) {
        throw std::domain_error("steering requested at a colocated geometry");
      }
      const double amp = std::sqrt(scenario.energy(m) * scenario.path_gain) / (d_t * d_r);
      set.amplitude(c) = amp;
      const double tau = params.delay_s(c);
      const double f = params.doppler_hz(c);

      // Doppler factors exp(j 2 pi f k Ts) by unit-modulus recurrence.
      const double dphi = 2.0 * M_PI * f * ts;
      const Cplx w(std::cos(dphi), std::sin(dphi));
      Cplx wk = w;
      for (int k = 1; k <= k_total; ++k) {
        const double t = k * ts - tau;
        Cplx base = waveform.sample(m, t);
        if (perturbation) base += perturbation->noise(k - 1, c);
        const Cplx dbase = waveform.sample_time_derivative(m, t);
        const int row = n * k_total + (k - 1);
        const Cplx u = amp * base * wk;
        set.s(row, c) = u;
        set.s_delay(row, c) = -amp * dbase * wk;
        set.s_doppler(row, c) = Cplx(0.0, 2.0 * M_PI * k * ts) * u;
        wk *= w;
      }
      set.s_range_tx.col(c) = -set.s.col(c) / d_t;
      set.s_range_rx.col(c) = -set.s.col(c) / d_r;
    }
  }
  return set;
}

SteeringSet build_steering(const GmskWaveform& waveform, const Scenario& scenario,
                           const TargetState& target, const SignalPerturbation* perturbation) {
  return build_steering(waveform, scenario,
                        intermediate_params(scenario.layout, target, scenario.gmsk.wavelength_m()),
                        perturbation);
}

Eigen::MatrixXcd build_reflection_covariance(const Scenario& scenario) {
  scenario.validate();
  const int m_tx = scenario.num_tx();
  const int n_rx = scenario.num_rx();
  const Eigen::Vector2d p = scenario.target.position;

  Eigen::MatrixXd r_tx(m_tx, m_tx), r_rx(n_rx, n_rx);
  for (int i = 0; i < m_tx; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double w = (i == j) ? 1.0
                                : decay_weight(scenario.reflection.angle_decay,
                                               separation_angle(p, scenario.layout.tx.col(i),
                                                                scenario.layout.tx.col(j)));
      r_tx(i, j) = r_tx(j, i) = w;
    }
  }
  for (int i = 0; i < n_rx; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double w = (i == j) ? 1.0
                                : decay_weight(scenario.reflection.angle_decay,
                                               separation_angle(p, scenario.layout.rx.col(i),
                                                                scenario.layout.rx.col(j)));
      r_rx(i, j) = r_rx(j, i) = w;
    }
  }

  const Eigen::MatrixXd base = kron(r_rx, r_tx);
  const int nm = m_tx * n_rx;
  Eigen::MatrixXcd out(nm, nm);
  for (int c = 0; c < nm; ++c) {
    const double sc = std::sqrt(scenario.reflection_sigma2(c));
    for (int d = 0; d < nm; ++d) {
      const double sd = std::sqrt(scenario.reflection_sigma2(d));
      out(c, d) = Cplx(sc * base(c, d) * sd, 0.0);
    }
  }
  return out;
}

NoiseFactors build_noise_factors(const Scenario& scenario) {
  scenario.validate();
  const int n_rx = scenario.num_rx();

  NoiseFactors nf;
  nf.samples = scenario.gmsk.samples();
  nf.qtilde.resize(n_rx, n_rx);
  for (int i = 0; i < n_rx; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double d = (scenario.layout.rx.col(i) - scenario.layout.rx.col(j)).norm();
      const double w = (i == j) ? 1.0 : decay_weight(scenario.noise.distance_decay, d);
      nf.qtilde(i, j) = nf.qtilde(j, i) = w;
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(nf.qtilde);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(
        "clutter-plus-noise receiver correlation is not positive definite; "
        "increase the distance decay");
  }
  nf.qtilde_inv = llt.solve(Eigen::MatrixXd::Identity(n_rx, n_rx));
  nf.qtilde_logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  nf.qtilde_sqrt = hermitian_sqrt<double>(nf.qtilde);

  // sigma_w^2 from the SCNR definition: received per-path signal energies
  // summed over paths, over N * 10^(scnr/10). The energy a path deposits in
  // the samples is sigma_c^2 * amp_c^2 * sum_k |s_m(k Ts)|^2, and the
  // waveform normalization sum_k |s|^2 Ts = 1 makes the last factor exactly
  // 1/Ts for every transmitter.
  const IntermediateParams truth = intermediate_params(scenario.layout, scenario.target,
                                                       scenario.gmsk.wavelength_m());
  double power = 0.0;
  for (int n = 0; n < n_rx; ++n) {
    for (int m = 0; m < scenario.num_tx(); ++m) {
      const int c = scenario.num_tx() * n + m;
      const double d_t = truth.range_tx_m(m);
      const double d_r = truth.range_rx_m(n);
      power += scenario.reflection_sigma2(c) * scenario.energy(m) * scenario.path_gain /
               (d_t * d_t * d_r * d_r);
    }
  }
  power /= scenario.gmsk.sample_interval_s();
  nf.sigma_w2 = power / (n_rx * std::pow(10.0, scenario.scnr_db / 10.0));
  return nf;
}

Eigen::MatrixXcd NoiseFactors::dense() const {
  Eigen::MatrixXd q = sigma_w2 * kron(qtilde, Eigen::MatrixXd::Identity(samples, samples));
  return q.cast<Cplx>();
}

double NoiseFactors::log_det() const {
  const int n_rx = static_cast<int>(qtilde.rows());
  return n_rx * samples * std::log(sigma_w2) + samples * qtilde_logdet;
}

Eigen::MatrixXcd NoiseFactors::apply_inverse(const Eigen::MatrixXcd& x) const {
  const int n_rx = static_cast<int>(qtilde.rows());
  if (x.rows() != static_cast<Eigen::Index>(n_rx) * samples) {
    throw std::invalid_argument("apply_inverse: row count mismatch");
  }
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(x.rows(), x.cols());
  for (int i = 0; i < n_rx; ++i) {
    for (int j = 0; j < n_rx; ++j) {
      const double w = qtilde_inv(i, j);
      if (w != 0.0) {
        out.middleRows(i * samples, samples) += w * x.middleRows(j * samples, samples);
      }
    }
  }
  return out / sigma_w2;
}

CovarianceBundle::CovarianceBundle(const Eigen::MatrixXcd& steering,
                                   const Eigen::MatrixXcd& reflection,
                                   const NoiseFactors& noise) {
  c_ = steering * reflection * steering.adjoint() + noise.dense();
  c_ = 0.5 * (c_ + c_.adjoint().eval());  // enforce Hermitian symmetry
  llt_.compute(c_);
  if (llt_.info() != Eigen::Success) {
    throw NumericalError("observation covariance is not positive definite");
  }
  logdet_ = 2.0 * llt_.matrixLLT().diagonal().real().array().log().sum();
}

double CovarianceBundle::quadratic(const Eigen::VectorXcd& r) const {
  return llt_.solve(r).dot(r).real();
}

double CovarianceBundle::log_likelihood(const Eigen::VectorXcd& r) const {
  return -quadratic(r) - logdet_;
}

Eigen::VectorXcd synthesize_observation(const Eigen::MatrixXcd& steering,
                                        const Eigen::MatrixXcd& reflection_sqrt,
                                        const NoiseFactors& noise, RngStream& rng) {
  const int nm = static_cast<int>(reflection_sqrt.cols());
  const int n_rx = static_cast<int>(noise.qtilde.rows());
  const int k = noise.samples;

  Eigen::VectorXcd g(nm);
  for (int i = 0; i < nm; ++i) g(i) = rng.complex_normal();
  const Eigen::VectorXcd zeta = reflection_sqrt * g;

  Eigen::VectorXcd wnoise(n_rx * k);
  for (int i = 0; i < n_rx * k; ++i) wnoise(i) = rng.complex_normal();
  Eigen::VectorXcd w = Eigen::VectorXcd::Zero(n_rx * k);
  const double sw = std::sqrt(noise.sigma_w2);
  for (int i = 0; i < n_rx; ++i) {
    for (int j = 0; j < n_rx; ++j) {
      const double q = noise.qtilde_sqrt(i, j);
      if (q != 0.0) w.segment(i * k, k) += (sw * q) * wnoise.segment(j * k, k);
    }
  }
  return steering * zeta + w;
}

}  // namespace radarcrb
