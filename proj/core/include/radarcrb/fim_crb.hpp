#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "radarcrb/signal_model.hpp"

namespace radarcrb {

/// The four intermediate parameter groups in stacked order.
enum class ParamGroup { Delay = 0, Doppler = 1, RangeTx = 2, RangeRx = 3 };

/// Fisher information over the intermediate parameters
/// [delays (NM), Dopplers (NM), tx ranges (M), rx ranges (N)].
struct FimIntermediate {
  int num_tx = 0;
  int num_rx = 0;
  Eigen::MatrixXd j;  ///< (2NM+M+N) square, symmetric PSD

  int group_offset(ParamGroup g) const;
  int group_size(ParamGroup g) const;
  /// View of one of the 16 blocks.
  Eigen::MatrixXd block(ParamGroup row, ParamGroup col) const;
};

/// Closed-form FIM: the low-rank structure of dC/d(vartheta_i) reduces every
/// block to Hadamard products of a handful of NM x NM kernels
/// (R S^H C^{-1} X_b, X_a^H C^{-1} X_b, R S^H C^{-1} S R), with receiver/
/// transmitter sums folding path-level kernels into the range blocks.
FimIntermediate fim_intermediate_closed_form(const SteeringSet& steering,
                                             const Eigen::MatrixXcd& reflection,
                                             const CovarianceBundle& cov);

/// Independent oracle: J_ij = tr(C^{-1} dC_i C^{-1} dC_j) evaluated with
/// dense analytic derivative matrices assembled from the steering derivative
/// columns. O(P * (NK)^3); intended for validation scales.
FimIntermediate fim_intermediate_trace_oracle(const SteeringSet& steering,
                                              const Eigen::MatrixXcd& reflection,
                                              const CovarianceBundle& cov);

/// Central finite-difference step sizes for derivative checks.
struct FdSteps {
  double position_m = 1e-2;
  double velocity_mps = 1e-3;
  double delay_rel_sample = 1e-4;  ///< delay step = this * Ts
  double doppler_hz = 1e-3;
  double range_m = 1e-2;
};

/// Trace-formula FIM with dC/d(vartheta) by central finite differences of the
/// full covariance rebuild; fully independent of the analytic derivative
/// columns. R and Q are held fixed (the covariance depends on the parameters
/// only through the steering matrix).
FimIntermediate fim_intermediate_trace_fd(const GmskWaveform& waveform, const Scenario& scenario,
                                          const IntermediateParams& params,
                                          const Eigen::MatrixXcd& reflection,
                                          const NoiseFactors& noise, const FdSteps& steps = {});

/// Position/velocity information and bound. If the information matrix is
/// singular (e.g. a single transmitter-receiver pair observes one Doppler),
/// the bound is the eigenvalue-thresholded pseudoinverse, reliable is false,
/// and null_direction spans the worst unobserved direction.
struct FimTheta {
  Eigen::Matrix4d fim = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d crb = Eigen::Matrix4d::Zero();
  double condition = 0.0;
  bool reliable = true;
  Eigen::Vector4d null_direction = Eigen::Vector4d::Zero();
};

/// Chain rule J(theta) = T J(vartheta) T^T with T the assembled geometry
/// Jacobian, followed by the guarded inversion.
FimTheta fim_theta(const FimIntermediate& fim, const JacobianBlocks& jac);

/// Trace-formula FIM directly over theta with dC/d(theta) by central finite
/// differences (delays, Dopplers and amplitudes all move together through the
/// geometry). End-to-end oracle for the chain rule.
Eigen::Matrix4d fim_theta_trace_fd(const GmskWaveform& waveform, const Scenario& scenario,
                                   const TargetState& target, const Eigen::MatrixXcd& reflection,
                                   const NoiseFactors& noise, const FdSteps& steps = {});

/// Scalar-expansion cross-check of the chain rule: the quadruple sum over
/// path pairs with 1/N and 1/M duplicate-count divisors, transcribed
/// literally, against the matrix product. The two agree to machine precision;
/// the report documents the discrepancy instead of asserting a bound.
struct ChainRuleExpansionReport {
  Eigen::Matrix4d product = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d expansion = Eigen::Matrix4d::Zero();
  double max_abs_discrepancy = 0.0;
  double max_rel_discrepancy = 0.0;
};
ChainRuleExpansionReport validate_chain_rule_expansion(const FimIntermediate& fim,
                                                       const JacobianBlocks& jac);

/// Expected CRB over random bit sequences (the bound averaged over the
/// waveform ensemble), with Monte Carlo standard errors per entry.
struct EcrbobResult {
  Eigen::Matrix4d mean_crb = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d stderr_crb = Eigen::Matrix4d::Zero();
  int draws_used = 0;
  int singular_draws = 0;

  /// Square root of a diagonal entry (0..3) of the mean CRB.
  double root_component(int i) const { return std::sqrt(mean_crb(i, i)); }
  /// Combined position / velocity roots.
  double root_position() const { return std::sqrt(mean_crb(0, 0) + mean_crb(1, 1)); }
  double root_velocity() const { return std::sqrt(mean_crb(2, 2) + mean_crb(3, 3)); }
};

/// Averages the single-draw CRB over num_draws independent bit draws.
/// Singular draws are excluded from the average; if they exceed 10% of the
/// total, throws NumericalError. With num_draws = 1 the result equals the
/// single-draw CRB exactly.
EcrbobResult ecrbob(const Scenario& scenario, int num_draws, RngStream& rng);

/// Mismatched-model Fisher information over the intermediate parameters:
/// J_mis = E_true[ (p_assumed/p_true)^2 grad log p_assumed (grad)^T ],
/// estimated by importance sampling with observations drawn from the true
/// covariance and weights handled in the log domain.
struct MismatchedFimResult {
  Eigen::MatrixXd j;                ///< (2NM+M+N) square
  Eigen::VectorXd diag_stderr;      ///< MC standard error of each diagonal entry
  double weight_rel_stderr = 0.0;   ///< relative MC error of the mean importance weight
  bool weight_warning = false;      ///< true when weight_rel_stderr > 10%
  int samples = 0;
};

/// `assumed` is the steering the estimator believes in (defines p0), `truth`
/// generates the data (defines p1). Both share the reflection covariance and
/// noise factors. Throws NumericalError if the mismatch violates the
/// integrability condition 2 C0^{-1} - C1^{-1} > 0.
MismatchedFimResult fim_mismatched(const SteeringSet& assumed, const SteeringSet& truth,
                                   const Eigen::MatrixXcd& reflection, const NoiseFactors& noise,
                                   int num_samples, RngStream& rng);

/// Entry-per-row CSV (block,i,j,value) of an intermediate FIM, optionally
/// followed by theta_fim / theta_crb blocks. Indices are 0-based within each
/// block.
void write_fim_csv(std::ostream& os, const FimIntermediate& fim, const FimTheta* theta = nullptr);

}  // namespace radarcrb
