#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wkflow::cli {

/// Runs the command line `args` (without the program name) and returns the
/// process exit code. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wkflow::cli
