#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace finharness {

/// Exit statuses shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitPartial = 1,  // finished, but some items carry embedded errors
  kExitInvalid = 2,  // configuration, validation or input failure
};

/// Entry point behind the `finharness` binary. `args` excludes the program
/// name. Subcommands: split, fuse, infer, eval, backtest, report.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace finharness
