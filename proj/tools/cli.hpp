#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cycpl::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Runs one subcommand. `args` excludes the program name. Diagnostics go to
/// `err`, progress and summaries to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cycpl::cli
