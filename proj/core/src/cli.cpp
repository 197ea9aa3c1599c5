#include "radarcrb/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "radarcrb/config.hpp"
#include "radarcrb/fim_crb.hpp"
#include "radarcrb/format.hpp"
#include "radarcrb/linalg.hpp"
#include "radarcrb/montecarlo.hpp"
#include "radarcrb/validate.hpp"

namespace radarcrb {

namespace {

namespace fs = std::filesystem;

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

struct LoadedConfig {
  ExperimentConfig cfg;
  std::string canonical_text;  ///< serialized form, what the manifest hashes
};

LoadedConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  const ConfigDocument doc = ConfigDocument::load(path);
  LoadedConfig loaded{experiment_from_config(doc), doc.serialize()};
  if (seed) loaded.cfg.seed = *seed;
  return loaded;
}

void emit_manifest(const fs::path& out_dir, const std::string& command, std::uint64_t seed,
                   const std::string& config_text, const std::vector<std::string>& outputs) {
  write_file(out_dir / "manifest.json", manifest_json(command, seed, config_text, outputs));
}

std::string bound_line(const char* label, const std::array<double, 6>& roots) {
  std::string line(label);
  for (int i = 0; i < 6; ++i)
    line += std::string(" ") + kComponentNames[i] + "=" + format_double(roots[i]);
  return line;
}

void print_sweep(std::ostream& os, const SweepResult& result) {
  for (const SweepPoint& p : result.points) {
    os << result.sweep_name << "=" << format_double(p.sweep_value)
       << " pos_rmse=" << format_double(p.rmse[4]) << " pos_bound=" << format_double(p.recrbob[4])
       << " vel_rmse=" << format_double(p.rmse[5]) << " vel_bound=" << format_double(p.recrbob[5])
       << " failures=" << p.failures << "/" << p.trials << "\n";
  }
  os << "threshold_scnr_db=" << format_double(threshold_scnr(result)) << "\n";
}

int cmd_validate(const fs::path& out_dir, std::uint64_t seed) {
  const ValidationReport report = run_validation(seed);
  write_validation_report(std::cout, report);
  std::ostringstream csv;
  write_validation_csv(csv, report);
  write_file(out_dir / "validation.csv", csv.str());
  emit_manifest(out_dir, "validate", seed, "", {"validation.csv"});
  return report.all_passed() ? 0 : 1;
}

int cmd_crb(const fs::path& out_dir, const LoadedConfig& loaded) {
  const Scenario& scene = loaded.cfg.scenario;
  RngStream bit_rng(loaded.cfg.seed, 0, 0, 0);
  const GmskWaveform waveform(scene.gmsk,
                              random_bits(bit_rng, scene.num_tx(), scene.gmsk.num_bits));
  const Eigen::MatrixXcd reflection = build_reflection_covariance(scene);
  const NoiseFactors noise = build_noise_factors(scene);
  const SteeringSet steering = build_steering(waveform, scene, scene.target);
  const CovarianceBundle cov(steering.s, reflection, noise);
  const FimIntermediate fim = fim_intermediate_closed_form(steering, reflection, cov);
  const FimTheta theta =
      fim_theta(fim, jacobian(scene.layout, scene.target, scene.gmsk.wavelength_m()));

  const std::array<double, 6> roots = {
      std::sqrt(theta.crb(0, 0)),
      std::sqrt(theta.crb(1, 1)),
      std::sqrt(theta.crb(2, 2)),
      std::sqrt(theta.crb(3, 3)),
      std::sqrt(theta.crb(0, 0) + theta.crb(1, 1)),
      std::sqrt(theta.crb(2, 2) + theta.crb(3, 3))};
  std::cout << bound_line("root_crb", roots) << "\n";
  if (!theta.reliable)
    std::cerr << "warning: information matrix ill-conditioned; bound uses a pseudoinverse\n";

  std::ostringstream csv;
  write_fim_csv(csv, fim, &theta);
  write_file(out_dir / "crb.csv", csv.str());
  emit_manifest(out_dir, "crb", loaded.cfg.seed, loaded.canonical_text, {"crb.csv"});
  return 0;
}

int cmd_ecrbob(const fs::path& out_dir, const LoadedConfig& loaded) {
  RngStream rng(loaded.cfg.seed, 0, 0, 3);
  const EcrbobResult result = ecrbob(loaded.cfg.scenario, loaded.cfg.bit_draws, rng);
  const std::array<double, 6> roots = {result.root_component(0), result.root_component(1),
                                       result.root_component(2), result.root_component(3),
                                       result.root_position(),   result.root_velocity()};
  std::cout << bound_line("recrbob", roots) << " draws=" << result.draws_used
            << " singular=" << result.singular_draws << "\n";

  std::ostringstream csv;
  csv << "component,root_bound,draws,singular\n";
  for (int i = 0; i < 6; ++i)
    csv << kComponentNames[i] << ',' << format_double(roots[i]) << ',' << result.draws_used << ','
        << result.singular_draws << '\n';
  write_file(out_dir / "ecrbob.csv", csv.str());
  emit_manifest(out_dir, "ecrbob", loaded.cfg.seed, loaded.canonical_text, {"ecrbob.csv"});
  return 0;
}

int cmd_mle(const fs::path& out_dir, const LoadedConfig& loaded) {
  const Scenario& scene = loaded.cfg.scenario;
  RngStream bit_rng(loaded.cfg.seed, 0, 0, 0);
  const GmskWaveform waveform(scene.gmsk,
                              random_bits(bit_rng, scene.num_tx(), scene.gmsk.num_bits));
  const Eigen::MatrixXcd reflection = build_reflection_covariance(scene);
  const Eigen::MatrixXcd reflection_sqrt = hermitian_sqrt(reflection);
  const NoiseFactors noise = build_noise_factors(scene);
  const SteeringSet steering = build_steering(waveform, scene, scene.target);
  RngStream obs_rng(loaded.cfg.seed, 0, 0, 1);
  const Eigen::VectorXcd observation =
      synthesize_observation(steering.s, reflection_sqrt, noise, obs_rng);
  const LikelihoodEvaluator evaluator(waveform, scene, reflection, noise, observation);
  const MlEstimate ml = ml_estimate(evaluator, loaded.cfg.search);

  const Eigen::Vector4d truth = scene.target.stacked();
  const Eigen::Vector4d estimate = ml.estimate.stacked();
  std::ostringstream csv;
  csv << "component,truth,estimate,error\n";
  for (int i = 0; i < 4; ++i) {
    csv << kComponentNames[i] << ',' << format_double(truth(i)) << ','
        << format_double(estimate(i)) << ',' << format_double(estimate(i) - truth(i)) << '\n';
    std::cout << kComponentNames[i] << ": truth=" << format_double(truth(i))
              << " estimate=" << format_double(estimate(i))
              << " error=" << format_double(estimate(i) - truth(i)) << "\n";
  }
  std::cout << "log_likelihood=" << format_double(ml.log_likelihood)
            << " refine_converged=" << (ml.refine_converged ? 1 : 0) << "\n";
  write_file(out_dir / "mle.csv", csv.str());
  emit_manifest(out_dir, "mle", loaded.cfg.seed, loaded.canonical_text, {"mle.csv"});
  return 0;
}

int cmd_sweep(const fs::path& out_dir, const LoadedConfig& loaded, int threads) {
  std::vector<std::string> outputs;
  if (loaded.cfg.sweep_parameter == SweepParameter::None) {
    const SweepResult result = run_rmse_sweep(loaded.cfg, threads);
    print_sweep(std::cout, result);
    if (result.failure_warning)
      std::cerr << "warning: some sweep point lost more than 5% of its trials\n";
    std::ostringstream csv;
    write_sweep_csv(csv, result);
    write_file(out_dir / "sweep_scnr.csv", csv.str());
    outputs.push_back("sweep_scnr.csv");
  } else {
    const std::string name =
        loaded.cfg.sweep_parameter == SweepParameter::AngleDecay ? "angle_decay"
                                                                 : "distance_decay";
    const std::vector<CorrelationRun> runs = run_correlation_sweep(loaded.cfg, threads);
    for (std::size_t i = 0; i < runs.size(); ++i) {
      std::cout << name << "=" << format_double(runs[i].parameter_value) << "\n";
      print_sweep(std::cout, runs[i].sweep);
      if (runs[i].sweep.failure_warning)
        std::cerr << "warning: some sweep point lost more than 5% of its trials\n";
      const std::string file = "sweep_" + name + "_" + std::to_string(i) + ".csv";
      std::ostringstream csv;
      write_sweep_csv(csv, runs[i].sweep);
      write_file(out_dir / file, csv.str());
      outputs.push_back(file);
    }
    std::ostringstream thresholds;
    write_threshold_csv(thresholds, name, runs);
    write_file(out_dir / "thresholds.csv", thresholds.str());
    outputs.push_back("thresholds.csv");
  }
  emit_manifest(out_dir, "sweep", loaded.cfg.seed, loaded.canonical_text, outputs);
  return 0;
}

int cmd_mismatch(const fs::path& out_dir, const LoadedConfig& loaded, int threads) {
  const SweepResult result = run_mismatch_sweep(loaded.cfg, threads);
  print_sweep(std::cout, result);
  if (result.failure_warning)
    std::cerr << "warning: some sweep point lost more than 5% of its trials\n";
  std::ostringstream csv;
  write_sweep_csv(csv, result);
  write_file(out_dir / "mismatch_scnr.csv", csv.str());
  emit_manifest(out_dir, "mismatch", loaded.cfg.seed, loaded.canonical_text,
                {"mismatch_scnr.csv"});
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Position/velocity estimation bounds for distributed radar networks"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;

  const auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config)
      cmd->add_option("--config", config_path, "experiment configuration file")
          ->required()
          ->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "override the configured master seed");
    cmd->add_option("--out", out_dir, "output directory (created if missing)");
    cmd->add_option("--threads", threads, "worker threads for Monte Carlo trials")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* validate_cmd =
      app.add_subcommand("validate", "run the numerical cross-check suite");
  add_common(validate_cmd, false);
  CLI::App* crb_cmd =
      app.add_subcommand("crb", "position/velocity bound for one bit realization");
  add_common(crb_cmd, true);
  CLI::App* ecrbob_cmd =
      app.add_subcommand("ecrbob", "expected bound over random bit sequences");
  add_common(ecrbob_cmd, true);
  CLI::App* mle_cmd =
      app.add_subcommand("mle", "one synthetic maximum-likelihood estimate");
  add_common(mle_cmd, true);
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "estimator RMSE and bounds across an SCNR grid");
  add_common(sweep_cmd, true);
  CLI::App* mismatch_cmd =
      app.add_subcommand("mismatch", "RMSE and bound sweep under model mismatch");
  add_common(mismatch_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const fs::path out(out_dir);
    fs::create_directories(out);
    if (validate_cmd->parsed()) return cmd_validate(out, seed.value_or(1));

    const LoadedConfig loaded = load_config(config_path, seed);
    if (crb_cmd->parsed()) return cmd_crb(out, loaded);
    if (ecrbob_cmd->parsed()) return cmd_ecrbob(out, loaded);
    if (mle_cmd->parsed()) return cmd_mle(out, loaded);
    if (sweep_cmd->parsed()) return cmd_sweep(out, loaded, threads);
    if (mismatch_cmd->parsed()) return cmd_mismatch(out, loaded, threads);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace radarcrb
