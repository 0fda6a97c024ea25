#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace exleak {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitLeak = 1,  // --fail-on-leak with a LEAK-INDICATED verdict; validate with problems
  kExitConfig = 2,
  kExitIo = 3,
  kExitPipeline = 4,
};

/// Runs the tool with argv-style arguments (args[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace exleak
