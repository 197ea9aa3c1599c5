#include "radarcrb/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace radarcrb {

namespace {

std::string trim(const std::string& s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto begin = std::find_if_not(s.begin(), s.end(), is_space);
  auto end = std::find_if_not(s.rbegin(), s.rend(), is_space).base();
  return begin < end ? std::string(begin, end) : std::string();
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line) + ": " + what);
}

double parse_number(const std::string& value, int line, const std::string& key) {
  const std::string v = trim(value);
  if (v.empty()) fail(line, "empty value for '" + key + "'");
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size()) fail(line, "malformed number '" + v + "' for '" + key + "'");
  return x;
}

long long parse_integer(const std::string& value, int line, const std::string& key) {
  const std::string v = trim(value);
  if (v.empty()) fail(line, "empty value for '" + key + "'");
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size()) fail(line, "malformed integer '" + v + "' for '" + key + "'");
  return x;
}

std::uint64_t parse_unsigned(const std::string& value, int line, const std::string& key) {
  const std::string v = trim(value);
  if (v.empty() || v[0] == '-') fail(line, "malformed unsigned integer for '" + key + "'");
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size())
    fail(line, "malformed unsigned integer '" + v + "' for '" + key + "'");
  return static_cast<std::uint64_t>(x);
}

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text) {
  ConfigDocument doc;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  Section* current = nullptr;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "unterminated section header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (name.empty()) fail(line_no, "empty section name");
      for (const Section& s : doc.sections_)
        if (s.name == name) fail(line_no, "duplicate section [" + name + "]");
      doc.sections_.push_back(Section{name, {}, line_no});
      current = &doc.sections_.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected 'key = value' or '[section]'");
    if (current == nullptr) fail(line_no, "entry before any [section] header");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    for (const Entry& e : current->entries)
      if (e.key == key)
        fail(line_no, "duplicate key '" + key + "' in section [" + current->name + "]");
    current->entries.push_back(Entry{key, value, line_no});
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

std::string ConfigDocument::serialize() const {
  std::string out;
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    if (i != 0) out += '\n';
    out += '[' + sections_[i].name + "]\n";
    for (const Entry& e : sections_[i].entries) out += e.key + " = " + e.value + '\n';
  }
  return out;
}

const ConfigDocument::Entry* ConfigDocument::find_entry(const std::string& section,
                                                        const std::string& key) const {
  for (const Section& s : sections_) {
    if (s.name != section) continue;
    for (const Entry& e : s.entries)
      if (e.key == key) return &e;
  }
  return nullptr;
}

const std::string* ConfigDocument::find(const std::string& section, const std::string& key) const {
  const Entry* e = find_entry(section, key);
  return e ? &e->value : nullptr;
}

double ConfigDocument::number(const std::string& section, const std::string& key,
                              double fallback) const {
  const Entry* e = find_entry(section, key);
  return e ? parse_number(e->value, e->line, key) : fallback;
}

int ConfigDocument::integer(const std::string& section, const std::string& key,
                            int fallback) const {
  const Entry* e = find_entry(section, key);
  if (!e) return fallback;
  const long long x = parse_integer(e->value, e->line, key);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
    fail(e->line, "integer out of range for '" + key + "'");
  return static_cast<int>(x);
}

std::uint64_t ConfigDocument::unsigned64(const std::string& section, const std::string& key,
                                         std::uint64_t fallback) const {
  const Entry* e = find_entry(section, key);
  return e ? parse_unsigned(e->value, e->line, key) : fallback;
}

std::string ConfigDocument::text(const std::string& section, const std::string& key,
                                 const std::string& fallback) const {
  const Entry* e = find_entry(section, key);
  return e ? e->value : fallback;
}

std::vector<double> ConfigDocument::number_list(const std::string& section,
                                                const std::string& key) const {
  const Entry* e = find_entry(section, key);
  std::vector<double> values;
  if (!e) return values;
  std::string item;
  std::istringstream in(e->value);
  while (std::getline(in, item, ',')) values.push_back(parse_number(item, e->line, key));
  if (values.empty()) fail(e->line, "empty list for '" + key + "'");
  return values;
}

namespace {

const std::unordered_map<std::string, std::unordered_set<std::string>>& schema() {
  static const std::unordered_map<std::string, std::unordered_set<std::string>> table = {
      {"stations",
       {"ring_center_x_m", "ring_center_y_m", "ring_radius_m", "num_tx", "num_rx", "tx_energy",
        "path_gain"}},
      {"target", {"x_m", "y_m", "vx_mps", "vy_mps"}},
      {"waveform",
       {"bit_duration_us", "bt_product", "num_bits", "oversampling", "freq_offset_hz",
        "carrier_hz"}},
      {"reflection", {"sigma2", "angle_decay"}},
      {"noise", {"distance_decay"}},
      {"scnr", {"scnr_db"}},
      {"experiment",
       {"scnr_start_db", "scnr_stop_db", "scnr_step_db", "trials", "bit_draws",
        "mismatch_samples", "mismatch_variance", "sweep_parameter", "sweep_values"}},
      {"search",
       {"center_x_m", "center_y_m", "center_vx_mps", "center_vy_mps", "position_halfwidth_m",
        "velocity_halfwidth_mps", "grid_position", "grid_velocity", "refine_starts",
        "refine_grid", "refine_max_iterations", "refine_tolerance", "refine_simplex_scale"}},
      {"seeds", {"master"}},
  };
  return table;
}

void reject_unknown(const ConfigDocument& doc) {
  for (const auto& section : doc.sections()) {
    const auto it = schema().find(section.name);
    if (it == schema().end())
      fail(section.line, "unknown section [" + section.name + "]");
    for (const auto& entry : section.entries)
      if (!it->second.count(entry.key))
        fail(entry.line, "unknown key '" + entry.key + "' in section [" + section.name + "]");
  }
}

std::vector<double> scnr_grid(const ConfigDocument& doc) {
  const double start = doc.number("experiment", "scnr_start_db", 0.0);
  const double stop = doc.number("experiment", "scnr_stop_db", 30.0);
  const double step = doc.number("experiment", "scnr_step_db", 5.0);
  if (!(step > 0.0)) throw ConfigError("scnr_step_db must be positive");
  if (stop < start) throw ConfigError("scnr_stop_db must be >= scnr_start_db");
  std::vector<double> grid;
  for (double v = start; v <= stop + 0.5 * step; v += step) grid.push_back(v);
  return grid;
}

}  // namespace

ExperimentConfig experiment_from_config(const ConfigDocument& doc) {
  reject_unknown(doc);
  ExperimentConfig cfg;

  const Eigen::Vector2d ring_center(doc.number("stations", "ring_center_x_m", 0.0),
                                    doc.number("stations", "ring_center_y_m", 0.0));
  const double radius = doc.number("stations", "ring_radius_m", 7000.0);
  const int num_tx = doc.integer("stations", "num_tx", 1);
  const int num_rx = doc.integer("stations", "num_rx", 1);
  cfg.scenario.layout = ring_layout(ring_center, radius, num_tx, num_rx);

  cfg.scenario.target.position = Eigen::Vector2d(doc.number("target", "x_m", 0.0),
                                                 doc.number("target", "y_m", 0.0));
  cfg.scenario.target.velocity = Eigen::Vector2d(doc.number("target", "vx_mps", 0.0),
                                                 doc.number("target", "vy_mps", 0.0));

  GmskParams& gmsk = cfg.scenario.gmsk;
  gmsk.bit_duration_s = doc.number("waveform", "bit_duration_us", 577.0) * 1e-6;
  gmsk.bt_product = doc.number("waveform", "bt_product", gmsk.bt_product);
  gmsk.num_bits = doc.integer("waveform", "num_bits", gmsk.num_bits);
  gmsk.oversampling = doc.integer("waveform", "oversampling", gmsk.oversampling);
  gmsk.freq_offset_hz = doc.number("waveform", "freq_offset_hz", gmsk.freq_offset_hz);
  gmsk.carrier_hz = doc.number("waveform", "carrier_hz", gmsk.carrier_hz);

  const std::vector<double> energy = doc.number_list("stations", "tx_energy");
  if (!energy.empty())
    cfg.scenario.tx_energy = Eigen::Map<const Eigen::VectorXd>(energy.data(),
                                                               static_cast<int>(energy.size()));
  cfg.scenario.path_gain = doc.number("stations", "path_gain", 1.0);

  const std::vector<double> sigma2 = doc.number_list("reflection", "sigma2");
  if (!sigma2.empty())
    cfg.scenario.reflection.sigma2 =
        Eigen::Map<const Eigen::VectorXd>(sigma2.data(), static_cast<int>(sigma2.size()));
  cfg.scenario.reflection.angle_decay =
      doc.number("reflection", "angle_decay", cfg.scenario.reflection.angle_decay);
  cfg.scenario.noise.distance_decay =
      doc.number("noise", "distance_decay", cfg.scenario.noise.distance_decay);
  cfg.scenario.scnr_db = doc.number("scnr", "scnr_db", 10.0);
  cfg.scenario.validate();

  cfg.search.position_center = Eigen::Vector2d(
      doc.number("search", "center_x_m", ring_center.x()),
      doc.number("search", "center_y_m", ring_center.y()));
  cfg.search.velocity_center = Eigen::Vector2d(doc.number("search", "center_vx_mps", 0.0),
                                               doc.number("search", "center_vy_mps", 0.0));
  cfg.search.position_halfwidth_m =
      doc.number("search", "position_halfwidth_m", cfg.search.position_halfwidth_m);
  cfg.search.velocity_halfwidth_mps =
      doc.number("search", "velocity_halfwidth_mps", cfg.search.velocity_halfwidth_mps);
  cfg.search.grid_position = doc.integer("search", "grid_position", cfg.search.grid_position);
  cfg.search.grid_velocity = doc.integer("search", "grid_velocity", cfg.search.grid_velocity);
  cfg.search.refine_starts = doc.integer("search", "refine_starts", cfg.search.refine_starts);
  cfg.search.refine_grid = doc.integer("search", "refine_grid", cfg.search.refine_grid);
  cfg.search.refine_max_iterations =
      doc.integer("search", "refine_max_iterations", cfg.search.refine_max_iterations);
  cfg.search.refine_tolerance =
      doc.number("search", "refine_tolerance", cfg.search.refine_tolerance);
  cfg.search.refine_simplex_scale =
      doc.number("search", "refine_simplex_scale", cfg.search.refine_simplex_scale);
  cfg.search.validate();

  cfg.scnr_grid_db = scnr_grid(doc);
  cfg.trials = doc.integer("experiment", "trials", cfg.trials);
  cfg.bit_draws = doc.integer("experiment", "bit_draws", cfg.bit_draws);
  cfg.mismatch_samples = doc.integer("experiment", "mismatch_samples", cfg.mismatch_samples);
  cfg.mismatch_variance = doc.number("experiment", "mismatch_variance", cfg.mismatch_variance);
  if (cfg.trials < 1 || cfg.bit_draws < 1 || cfg.mismatch_samples < 1)
    throw ConfigError("trials, bit_draws and mismatch_samples must be positive");
  if (!(cfg.mismatch_variance >= 0.0)) throw ConfigError("mismatch_variance must be >= 0");

  const std::string sweep = doc.text("experiment", "sweep_parameter", "none");
  if (sweep == "none")
    cfg.sweep_parameter = SweepParameter::None;
  else if (sweep == "angle_decay")
    cfg.sweep_parameter = SweepParameter::AngleDecay;
  else if (sweep == "distance_decay")
    cfg.sweep_parameter = SweepParameter::DistanceDecay;
  else
    throw ConfigError("sweep_parameter must be none, angle_decay or distance_decay");
  cfg.sweep_values = doc.number_list("experiment", "sweep_values");
  if (cfg.sweep_parameter != SweepParameter::None && cfg.sweep_values.empty())
    throw ConfigError("sweep_values required when sweep_parameter is set");

  cfg.seed = doc.unsigned64("seeds", "master", cfg.seed);
  return cfg;
}

Scenario apply_sweep_parameter(const Scenario& base, SweepParameter parameter, double value) {
  Scenario out = base;
  switch (parameter) {
    case SweepParameter::None:
      break;
    case SweepParameter::AngleDecay:
      out.reflection.angle_decay = value;
      break;
    case SweepParameter::DistanceDecay:
      out.noise.distance_decay = value;
      break;
  }
  return out;
}

std::string config_fingerprint(const std::string& serialized) {
  std::uint64_t hash = 1469598103934665603ull;
  for (const unsigned char c : serialized) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace radarcrb
