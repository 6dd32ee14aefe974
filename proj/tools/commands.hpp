#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mmorient::cli {

enum ExitCode : int {
    kSuccess = 0,
    kUsage = 1,
    kDataError = 2,
    kNumericFailure = 3,
    kGradCheckFailure = 4,
};

/// Parses `args` (args[0] is the program name) and runs the subcommand.
/// Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmorient::cli
