#pragma once

#include <iosfwd>

namespace pdmp {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kReportSchema = 1;

/// Entry point of the pdmp command-line tool. Returns the process exit code:
/// 0 success, 1 error, 2 infeasible, 3 unbounded; simulate and check return 1
/// when a test fails.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pdmp
