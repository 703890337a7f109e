#pragma once

#include <iosfwd>

namespace copos::cli {

enum ExitCode : int {
  kOk = 0,
  kInternalError = 1,
  kConfigError = 2,
  kDegenerateSector = 3,
  kLpInfeasible = 4,
  kVerificationFailed = 5,
  kDiverged = 6,
};

/// Entry point behind the `copos` executable; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace copos::cli
