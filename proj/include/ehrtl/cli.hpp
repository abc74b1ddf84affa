#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ehrtl::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
    kOk = 0,
    kFailed = 1,    // validation violations, or rejections under --strict
    kUsage = 2,     // bad flags or arguments
    kIoError = 3,   // unreadable input, unwritable output, bind failure
};

/// Runs the command line `args` (args[0] is the program name). Output goes to
/// `out`, diagnostics to `err`. The serve subcommand blocks until SIGINT/SIGTERM.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ehrtl::cli
