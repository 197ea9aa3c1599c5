#pragma once

#include <complex>
#include <limits>
#include <optional>

#include "radarcrb/geometry.hpp"
#include "radarcrb/linalg.hpp"
#include "radarcrb/rng.hpp"
#include "radarcrb/waveform.hpp"

namespace radarcrb {

/// Spatial correlation of the per-path reflection coefficients:
/// R = D^{1/2} (R_rx kron R_tx) D^{1/2} with D = diag(sigma2 per path),
/// [R_tx]_{mm'} = exp(-angle_decay * separation angle at the target between
/// transmitters m, m'), and R_rx the receiver-side analogue. angle_decay of
/// +infinity gives uncorrelated reflections (identity), 0 gives fully
/// coherent ones (all-ones).
struct ReflectionModel {
  Eigen::VectorXd sigma2 = Eigen::VectorXd::Ones(1);  ///< per-path variances; size 1 broadcasts
  double angle_decay = std::numeric_limits<double>::infinity();
};

/// Clutter-plus-noise correlation across receivers:
/// Q = sigma_w^2 * (Qtilde kron I_K), [Qtilde]_{nn'} =
/// exp(-distance_decay * |p_rx,n - p_rx,n'|). distance_decay of +infinity
/// gives spatially white clutter-plus-noise.
struct NoiseModel {
  double distance_decay = std::numeric_limits<double>::infinity();
};

/// Full experiment scene: geometry, truth, waveform, powers, correlation
/// models, and the SCNR that fixes the clutter-plus-noise power.
struct Scenario {
  StationLayout layout;
  TargetState target;
  GmskParams gmsk;
  Eigen::VectorXd tx_energy = Eigen::VectorXd::Ones(1);  ///< E_m; size 1 broadcasts
  double path_gain = 1.0;                                ///< P0
  ReflectionModel reflection;
  NoiseModel noise;
  double scnr_db = 10.0;

  int num_tx() const { return layout.num_tx(); }
  int num_rx() const { return layout.num_rx(); }
  int num_paths() const { return layout.num_paths(); }
  double energy(int tx) const {
    return tx_energy.size() == 1 ? tx_energy(0) : tx_energy(tx);
  }
  double reflection_sigma2(int path) const {
    return reflection.sigma2.size() == 1 ? reflection.sigma2(0) : reflection.sigma2(path);
  }

  /// Throws std::invalid_argument on inconsistent sizes or non-physical values.
  void validate() const;
};

/// Additive per-(path, sample) complex perturbation of the transmitted
/// waveform inside the steering columns (assumed-model mismatch). Entry
/// (k-1, c) perturbs sample k of path c; the table is fixed, in particular it
/// does not shift with candidate delays.
struct SignalPerturbation {
  Eigen::MatrixXcd noise;  ///< K x NM

  static SignalPerturbation draw(RngStream& rng, int samples, int paths, double variance);
};

/// Steering matrix S (NK x NM, block-diagonal over receivers: column
/// c = M*n + m is supported on rows of receiver n) together with its four
/// derivative column sets and the parameters it was built at.
/// Column c samples u_c(k) = amp_c * [s_m(k Ts - tau_c) + n_c(k)] *
/// exp(j 2 pi f_c k Ts), amp_c = sqrt(E_m P0 / (d_tm^2 d_rn^2)).
struct SteeringSet {
  int num_tx = 0, num_rx = 0, samples = 0;
  IntermediateParams params;
  Eigen::VectorXd amplitude;   ///< per path
  Eigen::MatrixXcd s;          ///< steering columns
  Eigen::MatrixXcd s_delay;    ///< d/d tau_c (differentiates the clean waveform term only)
  Eigen::MatrixXcd s_doppler;  ///< d/d f_c = j 2 pi k Ts elementwise scaling
  Eigen::MatrixXcd s_range_tx; ///< d/d d_tm = -u_c / d_tm
  Eigen::MatrixXcd s_range_rx; ///< d/d d_rn = -u_c / d_rn

  int num_paths() const { return num_tx * num_rx; }
  int dim() const { return num_rx * samples; }
};

/// Builds the steering set at explicit intermediate parameters (delays,
/// Dopplers, and the ranges that set the amplitudes are all free inputs).
SteeringSet build_steering(const GmskWaveform& waveform, const Scenario& scenario,
                           const IntermediateParams& params,
                           const SignalPerturbation* perturbation = nullptr);

/// Convenience overload at a target state (parameters derived from geometry).
SteeringSet build_steering(const GmskWaveform& waveform, const Scenario& scenario,
                           const TargetState& target,
                           const SignalPerturbation* perturbation = nullptr);

/// Reflection covariance R (NM x NM, real-valued entries, Hermitian PSD),
/// built from truth-scenario angles.
Eigen::MatrixXcd build_reflection_covariance(const Scenario& scenario);

/// Clutter-plus-noise Kronecker factors. sigma_w^2 is derived from the
/// scenario SCNR: received per-path sample energies
/// sigma_c^2 amp_c^2 sum_k |s_m(k Ts)|^2 (the sum is 1/Ts by the waveform
/// normalization) summed over all paths, normalized by N * 10^(scnr_db/10).
struct NoiseFactors {
  Eigen::MatrixXd qtilde;       ///< N x N receiver correlation
  Eigen::MatrixXd qtilde_inv;
  Eigen::MatrixXd qtilde_sqrt;
  double qtilde_logdet = 0.0;
  double sigma_w2 = 0.0;
  int samples = 0;              ///< K

  Eigen::MatrixXcd dense() const;       ///< sigma_w^2 (Qtilde kron I_K)
  double log_det() const;               ///< of the dense matrix
  /// Applies Q^{-1} to a stacked NK vector/matrix without forming Q.
  Eigen::MatrixXcd apply_inverse(const Eigen::MatrixXcd& x) const;
};

/// Throws NumericalError if Qtilde is not positive definite (distance_decay
/// too small for the layout).
NoiseFactors build_noise_factors(const Scenario& scenario);

/// Dense observation covariance C = S R S^H + Q with its Cholesky factor.
class CovarianceBundle {
 public:
  CovarianceBundle(const Eigen::MatrixXcd& steering, const Eigen::MatrixXcd& reflection,
                   const NoiseFactors& noise);

  const Eigen::MatrixXcd& dense() const { return c_; }
  double log_det() const { return logdet_; }
  Eigen::MatrixXcd solve(const Eigen::MatrixXcd& rhs) const { return llt_.solve(rhs); }
  Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs) const { return llt_.solve(rhs); }
  /// real(r^H C^{-1} r)
  double quadratic(const Eigen::VectorXcd& r) const;
  /// Gaussian log-likelihood -r^H C^{-1} r - ln det C (the -NK ln pi constant
  /// is dropped throughout the toolkit).
  double log_likelihood(const Eigen::VectorXcd& r) const;

 private:
  Eigen::MatrixXcd c_;
  Eigen::LLT<Eigen::MatrixXcd> llt_;
  double logdet_ = 0.0;
};

/// Draws r = S zeta + w with zeta ~ CN(0, R) and w ~ CN(0, Q). The reflection
/// vector is drawn first (NM complex normals), then the clutter-plus-noise
/// block of each receiver in order, so the stream layout is stable.
Eigen::VectorXcd synthesize_observation(const Eigen::MatrixXcd& steering,
                                        const Eigen::MatrixXcd& reflection_sqrt,
                                        const NoiseFactors& noise, RngStream& rng);

}  // namespace radarcrb
