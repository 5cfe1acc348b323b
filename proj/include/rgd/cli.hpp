#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rgd {

/// Exit codes of run_cli.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitInput = 2 };

/// Entry point of the `rgd` tool; `args` excludes the program name.
/// Subcommands: value, hedge, pde, simulate, check, sweep.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rgd
