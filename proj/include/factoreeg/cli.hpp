#pragma once

#include <span>
#include <string>

namespace factoreeg {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

/// Runs one subcommand. argv[0] is the program name.
int cli_main(std::span<const std::string> argv);

}  // namespace factoreeg
