#pragma once

// The vaerl command line, callable in-process so tests can drive it.

#include <iosfwd>
#include <string>
#include <vector>

namespace vaerl::cli {

enum ExitCode : int { ok = 0, runtime_failure = 1, config_error = 2, missing_artifact = 3 };

// `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vaerl::cli
