#include "radarcrb/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>
#include <utility>

#include "json.hpp"
#include "radarcrb/fim_crb.hpp"
#include "radarcrb/format.hpp"
#include "radarcrb/linalg.hpp"

namespace radarcrb {

namespace {

// Substream roles: every random draw is keyed on (seed, point, trial, role),
// so the trial schedule (thread count, point order) cannot move randomness
// between trials.
constexpr std::uint64_t kRoleBits = 0;
constexpr std::uint64_t kRoleObservation = 1;
constexpr std::uint64_t kRolePerturbation = 2;
constexpr std::uint64_t kRoleBound = 3;
constexpr std::uint64_t kRoleBoundBits = 4;
constexpr std::uint64_t kRoleBoundPerturbation = 5;
constexpr std::uint64_t kRoleBoundSamples = 6;

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::mutex mutex;
  std::exception_ptr first_error;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += workers) body(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct TrialOutcome {
  bool ok = false;
  Eigen::Vector4d error = Eigen::Vector4d::Zero();
};

std::array<double, 6> bound_roots(const Eigen::Matrix4d& crb) {
  return {std::sqrt(crb(0, 0)),            std::sqrt(crb(1, 1)),
          std::sqrt(crb(2, 2)),            std::sqrt(crb(3, 3)),
          std::sqrt(crb(0, 0) + crb(1, 1)), std::sqrt(crb(2, 2) + crb(3, 3))};
}

void finalize_point(SweepPoint& point, const std::vector<TrialOutcome>& outcomes) {
  std::array<double, 6> sum{};
  std::array<double, 6> sumsq{};
  int used = 0;
  for (const TrialOutcome& o : outcomes) {
    if (!o.ok) continue;
    ++used;
    std::array<double, 6> e2;
    for (int i = 0; i < 4; ++i) e2[i] = o.error(i) * o.error(i);
    e2[4] = e2[0] + e2[1];
    e2[5] = e2[2] + e2[3];
    for (int i = 0; i < 6; ++i) {
      sum[i] += e2[i];
      sumsq[i] += e2[i] * e2[i];
    }
  }
  point.trials = static_cast<int>(outcomes.size());
  point.failures = point.trials - used;
  if (used == 0) {
    point.rmse.fill(std::numeric_limits<double>::quiet_NaN());
    point.rmse_stderr.fill(std::numeric_limits<double>::quiet_NaN());
    return;
  }
  for (int i = 0; i < 6; ++i) {
    const double mse = sum[i] / used;
    point.rmse[i] = std::sqrt(mse);
    double se_mse = 0.0;
    if (used > 1) {
      const double var = std::max(0.0, (sumsq[i] - used * mse * mse) / (used - 1));
      se_mse = std::sqrt(var / used);
    }
    point.rmse_stderr[i] = point.rmse[i] > 0.0 ? se_mse / (2.0 * point.rmse[i]) : 0.0;
  }
}

TrialOutcome run_trial(const Scenario& scenario, const SearchSpec& search,
                       const Eigen::MatrixXcd& reflection,
                       const Eigen::MatrixXcd& reflection_sqrt, const NoiseFactors& noise,
                       std::uint64_t seed, std::uint64_t point, std::uint64_t trial,
                       bool mismatched, double mismatch_variance) {
  TrialOutcome out;
  try {
    RngStream bit_rng(seed, point, trial, kRoleBits);
    const GmskWaveform waveform(
        scenario.gmsk, random_bits(bit_rng, scenario.num_tx(), scenario.gmsk.num_bits));

    SignalPerturbation perturbation;
    const SignalPerturbation* believed = nullptr;
    if (mismatched) {
      RngStream pert_rng(seed, point, trial, kRolePerturbation);
      perturbation = SignalPerturbation::draw(pert_rng, scenario.gmsk.samples(),
                                              scenario.num_paths(), mismatch_variance);
      believed = &perturbation;
    }

    // Data always come from the clean model; under mismatch the estimator
    // maximizes the perturbed likelihood instead.
    const SteeringSet truth = build_steering(waveform, scenario, scenario.target);
    RngStream obs_rng(seed, point, trial, kRoleObservation);
    Eigen::VectorXcd observation =
        synthesize_observation(truth.s, reflection_sqrt, noise, obs_rng);

    const LikelihoodEvaluator evaluator(waveform, scenario, reflection, noise,
                                        std::move(observation), believed);
    const MlEstimate ml = ml_estimate(evaluator, search);
    out.error = ml.estimate.stacked() - scenario.target.stacked();
    out.ok = out.error.allFinite();
  } catch (const NumericalError&) {
    out.ok = false;
  } catch (const std::domain_error&) {
    out.ok = false;
  }
  return out;
}

std::array<double, 6> mismatched_bound(const Scenario& scenario,
                                       const Eigen::MatrixXcd& reflection,
                                       const NoiseFactors& noise, int draws, int samples,
                                       double variance, std::uint64_t seed,
                                       std::uint64_t point) {
  const JacobianBlocks jac =
      jacobian(scenario.layout, scenario.target, scenario.gmsk.wavelength_m());
  Eigen::Matrix4d mean = Eigen::Matrix4d::Zero();
  int used = 0;
  int singular = 0;
  for (int d = 0; d < draws; ++d) {
    RngStream bit_rng(seed, point, static_cast<std::uint64_t>(d), kRoleBoundBits);
    const GmskWaveform waveform(
        scenario.gmsk, random_bits(bit_rng, scenario.num_tx(), scenario.gmsk.num_bits));
    RngStream pert_rng(seed, point, static_cast<std::uint64_t>(d), kRoleBoundPerturbation);
    const SignalPerturbation perturbation = SignalPerturbation::draw(
        pert_rng, scenario.gmsk.samples(), scenario.num_paths(), variance);

    const SteeringSet assumed =
        build_steering(waveform, scenario, scenario.target, &perturbation);
    const SteeringSet truth = build_steering(waveform, scenario, scenario.target);
    RngStream sample_rng(seed, point, static_cast<std::uint64_t>(d), kRoleBoundSamples);
    const MismatchedFimResult mis =
        fim_mismatched(assumed, truth, reflection, noise, samples, sample_rng);

    const FimTheta theta =
        fim_theta(FimIntermediate{scenario.num_tx(), scenario.num_rx(), mis.j}, jac);
    if (!theta.reliable) {
      ++singular;
      continue;
    }
    mean += theta.crb;
    ++used;
  }
  if (used == 0 || singular * 10 > draws)
    throw NumericalError("mismatched bound: too many singular draws");
  mean /= used;
  return bound_roots(mean);
}

SweepResult run_sweep_impl(const ExperimentConfig& cfg, int threads, bool mismatched) {
  SweepResult result;
  result.points.resize(cfg.scnr_grid_db.size());
  const Eigen::MatrixXcd reflection = build_reflection_covariance(cfg.scenario);
  const Eigen::MatrixXcd reflection_sqrt = hermitian_sqrt(reflection);

  for (std::size_t p = 0; p < cfg.scnr_grid_db.size(); ++p) {
    Scenario scenario = cfg.scenario;
    scenario.scnr_db = cfg.scnr_grid_db[p];
    const NoiseFactors noise = build_noise_factors(scenario);

    SweepPoint& point = result.points[p];
    point.sweep_value = scenario.scnr_db;

    if (mismatched) {
      point.recrbob =
          mismatched_bound(scenario, reflection, noise, cfg.bit_draws, cfg.mismatch_samples,
                           cfg.mismatch_variance, cfg.seed, p);
    } else {
      RngStream bound_rng(cfg.seed, p, 0, kRoleBound);
      const EcrbobResult ec = ecrbob(scenario, cfg.bit_draws, bound_rng);
      point.recrbob = bound_roots(ec.mean_crb);
    }

    std::vector<TrialOutcome> outcomes(cfg.trials);
    parallel_for(cfg.trials, threads, [&](int t) {
      outcomes[t] = run_trial(scenario, cfg.search, reflection, reflection_sqrt, noise,
                              cfg.seed, p, static_cast<std::uint64_t>(t), mismatched,
                              cfg.mismatch_variance);
    });
    finalize_point(point, outcomes);
    if (point.failures * 20 > point.trials) result.failure_warning = true;
  }
  return result;
}

}  // namespace

SweepResult run_rmse_sweep(const ExperimentConfig& cfg, int threads) {
  return run_sweep_impl(cfg, threads, false);
}

SweepResult run_mismatch_sweep(const ExperimentConfig& cfg, int threads) {
  return run_sweep_impl(cfg, threads, true);
}

double threshold_scnr(const SweepResult& result) {
  double threshold = std::numeric_limits<double>::quiet_NaN();
  for (const SweepPoint& point : result.points) {
    const bool tracks = std::isfinite(point.rmse[4]) && point.rmse[4] <= 2.0 * point.recrbob[4];
    if (!tracks) {
      threshold = std::numeric_limits<double>::quiet_NaN();
    } else if (std::isnan(threshold)) {
      threshold = point.sweep_value;
    }
  }
  return threshold;
}

std::vector<CorrelationRun> run_correlation_sweep(const ExperimentConfig& cfg, int threads) {
  std::vector<CorrelationRun> runs;
  runs.reserve(cfg.sweep_values.size());
  for (const double value : cfg.sweep_values) {
    ExperimentConfig point_cfg = cfg;
    point_cfg.scenario = apply_sweep_parameter(cfg.scenario, cfg.sweep_parameter, value);
    CorrelationRun run;
    run.parameter_value = value;
    run.sweep = run_rmse_sweep(point_cfg, threads);
    run.threshold_db = threshold_scnr(run.sweep);
    runs.push_back(std::move(run));
  }
  return runs;
}

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
  os << "sweep_var,component,rmse,rmse_stderr,recrbob,trials,failures\n";
  for (const SweepPoint& point : result.points) {
    for (int i = 0; i < 6; ++i) {
      os << format_double(point.sweep_value) << ',' << kComponentNames[i] << ','
         << format_double(point.rmse[i]) << ',' << format_double(point.rmse_stderr[i]) << ','
         << format_double(point.recrbob[i]) << ',' << point.trials << ',' << point.failures
         << '\n';
    }
  }
}

void write_threshold_csv(std::ostream& os, const std::string& parameter_name,
                         const std::vector<CorrelationRun>& runs) {
  os << parameter_name << ",threshold_scnr_db\n";
  for (const CorrelationRun& run : runs)
    os << format_double(run.parameter_value) << ',' << format_double(run.threshold_db) << '\n';
}

std::string manifest_json(const std::string& command, std::uint64_t seed,
                          const std::string& config_text,
                          const std::vector<std::string>& outputs) {
  nlohmann::ordered_json manifest;
  manifest["command"] = command;
  manifest["seed"] = seed;
  manifest["config_hash"] = config_fingerprint(config_text);
  manifest["config"] = config_text;
  manifest["outputs"] = outputs;
  return manifest.dump(2) + "\n";
}

}  // namespace radarcrb
