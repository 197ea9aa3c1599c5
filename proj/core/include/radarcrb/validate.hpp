#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace radarcrb {

/// One validation check: the measured discrepancy against its allowed limit.
struct ValidationItem {
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double limit = 0.0;
};

struct ValidationReport {
  std::vector<ValidationItem> items;
  bool all_passed() const;
};

/// Deterministic cross-checks of the numerical core on a small scene:
/// geometry derivatives against finite differences, waveform invariants,
/// closed-form information against the trace oracle, the position/velocity
/// chain rule against an end-to-end finite-difference route, the factored
/// likelihood against the dense one, the matched limit of the mismatched
/// information, and estimator determinism. Runs in seconds.
ValidationReport run_validation(std::uint64_t seed);

/// One line per item: PASS/FAIL, name, observed value, limit.
void write_validation_report(std::ostream& os, const ValidationReport& report);

/// CSV form (name,passed,observed,limit), byte-stable for a given seed.
void write_validation_csv(std::ostream& os, const ValidationReport& report);

}  // namespace radarcrb
