#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tdkps {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitNumerical = 4 };

/// Runs the command line `args` (without the program name). Results go to
/// `out`; runtimes, logs and diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tdkps
