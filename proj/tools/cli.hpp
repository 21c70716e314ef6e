#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dreamsplat::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kBackendFailure = 2,
  kIoOrParse = 3,
};

/// Runs one command line; args[0] is the program name. Diagnostics go to `err`.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace dreamsplat::cli
