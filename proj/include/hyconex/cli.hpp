#pragma once

#include <iosfwd>

namespace hcx {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitUsage = 2,
  kExitData = 3,
  kExitDivergence = 4,
  kExitIo = 5,
};

/// Entry point behind the `hyconex` binary. Subcommands: gen-data, train,
/// eval, explain, serve, ablate.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hcx
