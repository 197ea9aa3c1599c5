#pragma once

#include <cstdio>
#include <string>

namespace radarcrb {

/// Shortest round-trippable decimal form of a double; locale-independent and
/// byte-stable across runs, which the reproducibility contract for CSV and
/// manifest output relies on.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Trim to the shortest representation that still round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof(probe), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(probe, "%lf", &back);
    if (back == v) return probe;
  }
  return buf;
}

}  // namespace radarcrb
