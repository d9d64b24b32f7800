#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sdeit::cli {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kMissingFile = 3,
  kBadInput = 4,
  kInvariant = 5,
  kInverseCrime = 6,
  kNumeric = 7,
  kGuidance = 8,
};

/// Runs one subcommand. Progress goes to `out`; failures produce exactly one
/// JSON line on `err` of the form {"error":..,"exit":..,"message":..}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sdeit::cli
