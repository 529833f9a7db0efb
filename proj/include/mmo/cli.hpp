#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mmo::cli {

enum ExitCode : int {
    kOk = 0,
    kVerifyFailed = 1,
    kConfigError = 2,
    kDataError = 3,
    kDivergence = 4,
    kDegenerate = 5,
};

/// Runs the command line `args` (without the program name). Reports go to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmo::cli
