#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "radarcrb/config.hpp"

namespace radarcrb {

/// Component order used by sweep results and CSVs: the four coordinates,
/// then the combined position and velocity errors.
inline constexpr std::array<const char*, 6> kComponentNames = {"x",  "y",   "vx",
                                                               "vy", "pos", "vel"};

/// One sweep point: estimator RMSE across trials next to the matching
/// expected bound. rmse_stderr is the delta-method standard error
/// SE(MSE) / (2 RMSE). Trials that fail numerically are counted in
/// `failures` and excluded from the averages.
struct SweepPoint {
  double sweep_value = 0.0;
  std::array<double, 6> rmse{};
  std::array<double, 6> rmse_stderr{};
  std::array<double, 6> recrbob{};
  int trials = 0;
  int failures = 0;
};

struct SweepResult {
  std::string sweep_name = "scnr_db";
  std::vector<SweepPoint> points;
  bool failure_warning = false;  ///< some point lost more than 5% of its trials
};

/// Maximum-likelihood RMSE versus SCNR with the expected bound at each point.
/// Per-trial randomness comes from substreams keyed on
/// (seed, point, trial, role), so results are identical for any thread count.
SweepResult run_rmse_sweep(const ExperimentConfig& cfg, int threads);

/// Same sweep under model mismatch: each trial perturbs the steering the
/// estimator believes in while the data come from the clean model, and the
/// bound is the mismatched one averaged over bit and perturbation draws.
SweepResult run_mismatch_sweep(const ExperimentConfig& cfg, int threads);

/// Threshold SCNR: the smallest sweep value from which the combined position
/// RMSE stays within a factor of two of the combined position bound for the
/// rest of the sweep. A low point that tracks the bound only because the bound
/// fills the whole search box does not count. NaN when the last point fails.
double threshold_scnr(const SweepResult& result);

/// One RMSE sweep per correlation-parameter value.
struct CorrelationRun {
  double parameter_value = 0.0;
  SweepResult sweep;
  double threshold_db = 0.0;
};
std::vector<CorrelationRun> run_correlation_sweep(const ExperimentConfig& cfg, int threads);

/// Long-format CSV: sweep_var,component,rmse,rmse_stderr,recrbob,trials,failures.
void write_sweep_csv(std::ostream& os, const SweepResult& result);

/// Threshold summary across correlation runs:
/// <parameter_name>,threshold_scnr_db.
void write_threshold_csv(std::ostream& os, const std::string& parameter_name,
                         const std::vector<CorrelationRun>& runs);

/// Reproducibility manifest: command, seed, config fingerprint and full text,
/// output file names. Deliberately carries no timestamps so reruns of the
/// same configuration are byte-identical.
std::string manifest_json(const std::string& command, std::uint64_t seed,
                          const std::string& config_text,
                          const std::vector<std::string>& outputs);

}  // namespace radarcrb
