#pragma once

#include <string>
#include <vector>

namespace chn {

// Process exit codes.
enum ExitStatus : int {
  kExitOk = 0,
  kExitUsage = 1,      // bad flags, invalid configuration
  kExitData = 2,       // missing files, parse or shape errors
  kExitNumerical = 3,  // divergence, failed verification, undefined metric
};

// Entry point for the `chn` executable. Subcommands: gen-data, train,
// encode, search, eval, sweep, grad-check, verify-bound, verify-identities.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace chn
