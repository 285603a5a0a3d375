#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sermm::cli {

enum ExitCode { kOk = 0, kUsage = 2, kDataError = 3, kInternal = 4 };

/// Runs one command line (args excludes the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sermm::cli
