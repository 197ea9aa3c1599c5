#pragma once

namespace radarcrb {

/// argv-style entry point shared by the installed binary and the tests.
/// Exit codes: 0 success, 1 failed validation checks, 2 configuration error,
/// 3 numerical failure.
int run_cli(int argc, const char* const* argv);

}  // namespace radarcrb
