#include "radarcrb/validate.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "radarcrb/estimator.hpp"
#include "radarcrb/fim_crb.hpp"
#include "radarcrb/format.hpp"
#include "radarcrb/linalg.hpp"

namespace radarcrb {

namespace {

Scenario validation_scene() {
  Scenario s;
  s.layout = ring_layout(Eigen::Vector2d(15000.0, 10000.0), 7000.0, 2, 3);
  s.target.position = Eigen::Vector2d(15150.0, 10127.5);
  s.target.velocity = Eigen::Vector2d(50.0, 30.0);
  s.gmsk.num_bits = 8;
  s.gmsk.oversampling = 2;
  s.reflection.angle_decay = 0.1;
  s.noise.distance_decay = 5e-6;
  s.scnr_db = 10.0;
  return s;
}

void push(ValidationReport& report, const std::string& name, double observed, double limit) {
  report.items.push_back(
      ValidationItem{name, std::isfinite(observed) && observed <= limit, observed, limit});
}

double jacobian_fd_error(const Scenario& s) {
  const double wavelength = s.gmsk.wavelength_m();
  const Eigen::MatrixXd analytic = jacobian(s.layout, s.target, wavelength).assembled();
  Eigen::MatrixXd fd(analytic.rows(), analytic.cols());
  const double steps[4] = {1e-2, 1e-2, 1e-3, 1e-3};
  for (int i = 0; i < 4; ++i) {
    Eigen::Vector4d theta = s.target.stacked();
    theta(i) += steps[i];
    const Eigen::VectorXd hi =
        intermediate_params(s.layout, TargetState::from_stacked(theta), wavelength).stacked();
    theta(i) -= 2.0 * steps[i];
    const Eigen::VectorXd lo =
        intermediate_params(s.layout, TargetState::from_stacked(theta), wavelength).stacked();
    fd.row(i) = ((hi - lo) / (2.0 * steps[i])).transpose();
  }
  double worst = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double scale = analytic.row(i).cwiseAbs().maxCoeff();
    if (scale <= 0.0) continue;
    worst = std::max(worst, (analytic.row(i) - fd.row(i)).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

void waveform_checks(ValidationReport& report, const GmskWaveform& wf) {
  const GmskParams& p = wf.params();
  const double ts = p.sample_interval_s();

  push(report, "pulse_area", std::abs(wf.pulse().total() - M_PI / 2.0), 1e-8);

  double symmetry = 0.0;
  for (int i = 0; i <= 20; ++i) {
    const double t = -2.0 * p.bit_duration_s + 5.0 * p.bit_duration_s * i / 20.0;
    symmetry = std::max(symmetry, std::abs(wf.pulse().q(t) + wf.pulse().q(p.bit_duration_s - t) -
                                           wf.pulse().total()));
  }
  push(report, "pulse_symmetry", symmetry, 1e-8);

  double norm_err = 0.0;
  double envelope_err = 0.0;
  for (int m = 0; m < wf.num_tx(); ++m) {
    double energy = 0.0;
    for (int k = 1; k <= p.samples(); ++k) {
      const double mag = std::abs(wf.sample(m, k * ts));
      energy += mag * mag * ts;
      envelope_err = std::max(envelope_err, std::abs(mag - wf.amplitude(m)));
    }
    norm_err = std::max(norm_err, std::abs(energy - 1.0));
  }
  push(report, "waveform_normalization", norm_err, 1e-12);
  push(report, "waveform_envelope", envelope_err, 1e-12);

  double deriv_err = 0.0;
  const double dt = 1e-9;
  for (int m = 0; m < wf.num_tx(); ++m) {
    for (int k = 1; k <= p.samples(); k += 3) {
      const double t = k * ts - 0.37 * ts;
      const std::complex<double> fd = (wf.sample(m, t + dt) - wf.sample(m, t - dt)) / (2.0 * dt);
      const std::complex<double> an = wf.sample_time_derivative(m, t);
      deriv_err = std::max(deriv_err, std::abs(an - fd) / std::max(1.0, std::abs(an)));
    }
  }
  push(report, "waveform_derivative_fd", deriv_err, 1e-6);
}

}  // namespace

bool ValidationReport::all_passed() const {
  for (const ValidationItem& item : items)
    if (!item.passed) return false;
  return true;
}

ValidationReport run_validation(std::uint64_t seed) {
  ValidationReport report;
  const Scenario scene = validation_scene();

  push(report, "geometry_jacobian_fd", jacobian_fd_error(scene), 1e-6);

  RngStream bit_rng(seed, 0, 0, 0);
  const GmskWaveform waveform(scene.gmsk,
                              random_bits(bit_rng, scene.num_tx(), scene.gmsk.num_bits));
  waveform_checks(report, waveform);

  const Eigen::MatrixXcd reflection = build_reflection_covariance(scene);
  const NoiseFactors noise = build_noise_factors(scene);
  const SteeringSet steering = build_steering(waveform, scene, scene.target);
  const CovarianceBundle cov(steering.s, reflection, noise);

  const FimIntermediate closed = fim_intermediate_closed_form(steering, reflection, cov);
  const FimIntermediate oracle = fim_intermediate_trace_oracle(steering, reflection, cov);
  const double fim_scale = closed.j.cwiseAbs().maxCoeff();
  push(report, "fim_closed_vs_trace",
       (closed.j - oracle.j).cwiseAbs().maxCoeff() / fim_scale, 1e-8);

  const JacobianBlocks jac = jacobian(scene.layout, scene.target, scene.gmsk.wavelength_m());
  const FimTheta theta = fim_theta(closed, jac);
  const Eigen::Matrix4d theta_fd =
      fim_theta_trace_fd(waveform, scene, scene.target, reflection, noise);
  push(report, "chain_rule_vs_fd",
       (theta.fim - theta_fd).cwiseAbs().maxCoeff() / theta.fim.cwiseAbs().maxCoeff(), 1e-4);

  const ChainRuleExpansionReport expansion = validate_chain_rule_expansion(closed, jac);
  push(report, "chain_rule_expansion", expansion.max_rel_discrepancy, 1e-10);

  {
    RngStream obs_rng(seed, 1, 0, 0);
    const Eigen::MatrixXcd reflection_sqrt = hermitian_sqrt(reflection);
    const Eigen::VectorXcd obs =
        synthesize_observation(steering.s, reflection_sqrt, noise, obs_rng);
    const LikelihoodEvaluator evaluator(waveform, scene, reflection, noise, obs);
    double fast_vs_dense = 0.0;
    RngStream cand_rng(seed, 2, 0, 0);
    for (int i = 0; i < 5; ++i) {
      TargetState candidate = scene.target;
      candidate.position += Eigen::Vector2d(cand_rng.uniform(-200.0, 200.0),
                                            cand_rng.uniform(-200.0, 200.0));
      candidate.velocity += Eigen::Vector2d(cand_rng.uniform(-20.0, 20.0),
                                            cand_rng.uniform(-20.0, 20.0));
      const double fast = evaluator(candidate);
      const double dense = evaluator.dense_reference(candidate);
      fast_vs_dense = std::max(fast_vs_dense, std::abs(fast - dense) / (1.0 + std::abs(dense)));
    }
    push(report, "likelihood_fast_vs_dense", fast_vs_dense, 1e-10);
  }

  {
    RngStream mis_rng(seed, 3, 0, 0);
    const MismatchedFimResult matched =
        fim_mismatched(steering, steering, reflection, noise, 4000, mis_rng);
    double worst_sigma = 0.0;
    for (int i = 0; i < closed.j.rows(); ++i) {
      const double se = std::max(matched.diag_stderr(i),
                                 1e-12 * std::max(1.0, std::abs(closed.j(i, i))));
      worst_sigma = std::max(worst_sigma, std::abs(matched.j(i, i) - closed.j(i, i)) / se);
    }
    push(report, "mismatched_matched_limit", worst_sigma, 4.0);
  }

  {
    RngStream bound_rng(seed, 4, 0, 0);
    const EcrbobResult single = ecrbob(scene, 1, bound_rng);
    RngStream replay_rng(seed, 4, 0, 0);
    const GmskWaveform replay(scene.gmsk,
                              random_bits(replay_rng, scene.num_tx(), scene.gmsk.num_bits));
    const SteeringSet replay_steering = build_steering(replay, scene, scene.target);
    const CovarianceBundle replay_cov(replay_steering.s, reflection, noise);
    const FimTheta replay_theta =
        fim_theta(fim_intermediate_closed_form(replay_steering, reflection, replay_cov), jac);
    push(report, "ecrbob_single_draw",
         (single.mean_crb - replay_theta.crb).cwiseAbs().maxCoeff(), 0.0);
  }

  {
    Scenario hot = scene;
    hot.scnr_db = 60.0;
    const NoiseFactors hot_noise = build_noise_factors(hot);
    const CovarianceBundle hot_cov(steering.s, reflection, hot_noise);
    const FimTheta hot_theta =
        fim_theta(fim_intermediate_closed_form(steering, reflection, hot_cov), jac);
    const double bound_pos = std::sqrt(hot_theta.crb(0, 0) + hot_theta.crb(1, 1));
    const double bound_vel = std::sqrt(hot_theta.crb(2, 2) + hot_theta.crb(3, 3));

    const Eigen::MatrixXcd reflection_sqrt = hermitian_sqrt(reflection);
    RngStream obs_rng(seed, 5, 0, 0);
    const Eigen::VectorXcd obs =
        synthesize_observation(steering.s, reflection_sqrt, hot_noise, obs_rng);
    const LikelihoodEvaluator evaluator(waveform, hot, reflection, hot_noise, obs);
    SearchSpec search;
    search.position_center = hot.target.position + Eigen::Vector2d(5.0, -5.0);
    search.velocity_center = hot.target.velocity + Eigen::Vector2d(2.0, -2.0);
    search.position_halfwidth_m = 50.0;
    search.velocity_halfwidth_mps = 20.0;
    search.grid_position = 11;
    search.grid_velocity = 5;
    const MlEstimate first = ml_estimate(evaluator, search);
    const MlEstimate second = ml_estimate(evaluator, search);
    push(report, "estimator_position_recovery",
         (first.estimate.position - hot.target.position).norm(), 6.0 * bound_pos);
    push(report, "estimator_velocity_recovery",
         (first.estimate.velocity - hot.target.velocity).norm(), 6.0 * bound_vel);
    push(report, "estimator_determinism",
         (first.estimate.stacked() - second.estimate.stacked()).cwiseAbs().maxCoeff(), 0.0);
  }

  return report;
}

void write_validation_report(std::ostream& os, const ValidationReport& report) {
  for (const ValidationItem& item : report.items) {
    os << (item.passed ? "PASS" : "FAIL") << "  " << item.name
       << "  observed=" << format_double(item.observed) << "  limit=" << format_double(item.limit)
       << "\n";
  }
}

void write_validation_csv(std::ostream& os, const ValidationReport& report) {
  os << "name,passed,observed,limit\n";
  for (const ValidationItem& item : report.items) {
    os << item.name << ',' << (item.passed ? 1 : 0) << ',' << format_double(item.observed) << ','
       << format_double(item.limit) << '\n';
  }
}

}  // namespace radarcrb
