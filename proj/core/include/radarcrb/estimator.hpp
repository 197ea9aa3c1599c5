#pragma once

#include "radarcrb/signal_model.hpp"

namespace radarcrb {

/// ML search region: an axis-aligned box around the given centers. The
/// search profiles velocity out at every visited position (Dopplers are
/// linear in velocity at fixed position, so the profiled surface over
/// position is a clean bowl without the delay-Doppler coupling ridge),
/// scans positions on a grid, then refines position with Nelder-Mead on the
/// profiled surface. An axis group with zero halfwidth is held fixed.
struct SearchSpec {
  Eigen::Vector2d position_center = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity_center = Eigen::Vector2d::Zero();
  double position_halfwidth_m = 500.0;
  double velocity_halfwidth_mps = 50.0;
  int grid_position = 21;  ///< nodes per position axis of the coarse grid
  int grid_velocity = 7;   ///< nodes per axis of each velocity zoom round
  int refine_starts = 3;   ///< coarse candidates given a local fine grid
  int refine_grid = 7;     ///< nodes per axis of each local fine grid
  int refine_max_iterations = 500;
  double refine_tolerance = 1e-6;     ///< relative log-likelihood spread at convergence
  double refine_simplex_scale = 0.5;  ///< initial simplex size as a fraction of one grid cell

  void validate() const;
};

struct MlEstimate {
  TargetState estimate;
  double log_likelihood = 0.0;
  TargetState coarse_estimate;
  double coarse_log_likelihood = 0.0;
  int refine_iterations = 0;
  bool refine_converged = false;
};

/// Concentrated Gaussian log-likelihood L(theta) = -r^H C^{-1} r - ln det C
/// with C(theta) = S(theta) R S(theta)^H + Q, evaluated through the factored
/// identity C^{-1} = Q^{-1} - Q^{-1} S W^{-1} R S^H Q^{-1},
/// ln det C = ln det Q + ln det W, W = I + R S^H Q^{-1} S (NM x NM). Valid for
/// singular R, and costs O(NM) small-matrix work per candidate instead of an
/// NK x NK factorization. dense_reference() evaluates the same value through
/// the dense Cholesky route for cross-validation.
///
/// Holds references to the waveform and scenario (they must outlive the
/// evaluator) and copies of the small reflection/noise factor matrices.
class LikelihoodEvaluator {
 public:
  LikelihoodEvaluator(const GmskWaveform& waveform, const Scenario& scenario,
                      const Eigen::MatrixXcd& reflection, const NoiseFactors& noise,
                      Eigen::VectorXcd observation,
                      const SignalPerturbation* perturbation = nullptr);

  /// -infinity for a candidate colocated with a station.
  double operator()(const TargetState& candidate) const;

  double dense_reference(const TargetState& candidate) const;

  /// Position-dependent work shared by all velocity candidates at one
  /// position: delayed waveform samples, amplitudes, Doppler direction
  /// coefficients. Invalid (colocated) contexts yield -infinity likelihoods.
  struct PositionContext {
    bool valid = false;
    Eigen::Vector2d position = Eigen::Vector2d::Zero();
    Eigen::MatrixXcd delayed;          ///< K x NM, amp * (s_m(k Ts - tau_c) + n_c(k))
    Eigen::Matrix2Xd doppler_coeff;    ///< 2 x NM, f_c = coeff_c . v
  };

  PositionContext position_context(const Eigen::Vector2d& position) const;
  double log_likelihood_at(const PositionContext& ctx, const Eigen::Vector2d& velocity) const;

  /// Halfwidth (m/s) of the velocity mainlobe of the coherent burst,
  /// wavelength / (2 * duration); a velocity scan must sample finer than this
  /// to lock the mainlobe instead of a burst-length sidelobe.
  double velocity_mainlobe_mps() const;

  const Eigen::VectorXcd& observation() const { return observation_; }

 private:
  const GmskWaveform& waveform_;
  const Scenario& scenario_;
  Eigen::MatrixXcd reflection_;
  NoiseFactors noise_;
  const SignalPerturbation* perturbation_;
  Eigen::VectorXcd observation_;

  int m_tx_, n_rx_, samples_;
  double ts_, wavelength_;
  Eigen::MatrixXd qinv_scaled_;        ///< Qtilde^{-1} / sigma_w^2
  double quad_noise_only_ = 0.0;       ///< r^H Q^{-1} r
  double logdet_noise_ = 0.0;          ///< ln det Q
  Eigen::MatrixXcd rx_gram_;           ///< r_n^H r_n' inner products
};

/// Profile search: one dense velocity scan locks the trial's velocity
/// mainlobe (its location drifts only a few m/s across the position box), and
/// every position node then maximizes velocity out with a hierarchical zoom
/// seeded there (cheap, the position context is shared). The best
/// refine_starts coarse nodes (spatially deduplicated) each get a local
/// refine_grid x refine_grid position grid spanning one coarse cell, the
/// overall best seeds a Nelder-Mead refinement of position over the profiled
/// surface, and a final deep velocity zoom polishes the estimate. Ties
/// resolve to the earliest candidate in scan order; the returned estimate is
/// never worse than the best grid node. Deterministic.
MlEstimate ml_estimate(const LikelihoodEvaluator& evaluator, const SearchSpec& search);

/// One-off likelihood evaluation (builds a temporary evaluator).
double log_likelihood(const GmskWaveform& waveform, const Scenario& scenario,
                      const Eigen::MatrixXcd& reflection, const NoiseFactors& noise,
                      const Eigen::VectorXcd& observation, const TargetState& candidate,
                      const SignalPerturbation* perturbation = nullptr);

}  // namespace radarcrb
