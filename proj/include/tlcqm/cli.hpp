#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tlcqm {

/// Exit codes shared by every subcommand.
enum ExitCode : int { exit_ok = 0, exit_runtime = 1, exit_usage = 2 };

/// Entry point for the `tlcqm` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace tlcqm
