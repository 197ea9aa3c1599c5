#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "radarcrb/estimator.hpp"
#include "radarcrb/signal_model.hpp"

namespace radarcrb {

/// Configuration syntax or schema violation; the message carries the
/// offending line number when one is known.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// INI-style configuration document. Values are kept as trimmed raw strings
/// so that parse(serialize(doc)) reproduces the document exactly (comments
/// and blank lines excepted). Sections and keys preserve file order.
///
/// Syntax: `[section]` headers, `key = value` entries, full-line comments
/// starting with '#' or ';'. Duplicate sections or duplicate keys within a
/// section are rejected.
class ConfigDocument {
 public:
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
  };
  struct Section {
    std::string name;
    std::vector<Entry> entries;
    int line = 0;
  };

  static ConfigDocument parse(const std::string& text);
  static ConfigDocument load(const std::string& path);

  std::string serialize() const;

  const std::vector<Section>& sections() const { return sections_; }

  /// nullptr when the section or key is absent.
  const std::string* find(const std::string& section, const std::string& key) const;

  /// Typed getters; the fallback is returned when the key is absent.
  /// Malformed values throw ConfigError with the key's line number.
  /// Numbers accept "inf".
  double number(const std::string& section, const std::string& key, double fallback) const;
  int integer(const std::string& section, const std::string& key, int fallback) const;
  std::uint64_t unsigned64(const std::string& section, const std::string& key,
                           std::uint64_t fallback) const;
  std::string text(const std::string& section, const std::string& key,
                   const std::string& fallback) const;
  /// Comma-separated list of numbers; empty when the key is absent.
  std::vector<double> number_list(const std::string& section, const std::string& key) const;

 private:
  const Entry* find_entry(const std::string& section, const std::string& key) const;

  std::vector<Section> sections_;
};

/// Scenario parameter a correlation sweep varies between runs.
enum class SweepParameter { None, AngleDecay, DistanceDecay };

/// Everything an experiment run needs: the scene, the estimator search box,
/// and the Monte Carlo plan.
struct ExperimentConfig {
  Scenario scenario;
  SearchSpec search;
  std::vector<double> scnr_grid_db;
  int trials = 200;
  int bit_draws = 50;
  int mismatch_samples = 2000;
  double mismatch_variance = 0.1;
  SweepParameter sweep_parameter = SweepParameter::None;
  std::vector<double> sweep_values;
  std::uint64_t seed = 1;
};

/// Builds the experiment from a parsed document, applying defaults for
/// absent keys. Rejects unknown sections or keys (with line numbers) so that
/// typos fail loudly instead of silently falling back.
ExperimentConfig experiment_from_config(const ConfigDocument& doc);

/// Applies a correlation-sweep parameter value to a copy of the scenario.
Scenario apply_sweep_parameter(const Scenario& base, SweepParameter parameter, double value);

/// 64-bit FNV-1a of the serialized document, printed as 16 hex digits.
/// Stable across platforms; used to stamp output manifests.
std::string config_fingerprint(const std::string& serialized);

}  // namespace radarcrb
