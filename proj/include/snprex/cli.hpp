#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace snprex {

/// Runs one subcommand. `args` excludes the program name. Returns the process
/// exit code: 0 success, 1 usage error, 2 data/validation error, 3 runtime
/// failure.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_command(int argc, char** argv);

}  // namespace snprex
