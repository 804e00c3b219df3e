#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cmr::cli {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kConvergence = 3 };

/// Parses `args` (without the program name) and runs one subcommand.
/// Progress and results go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cmr::cli
