#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace egap::cli {

enum ExitCode : int {
  kSuccess = 0,
  kInputError = 2,
  kBudgetExhausted = 3,
  kNumericalFailure = 4,
};

/// Runs `egap <subcommand> ...`; `args` excludes the program name.
/// Subcommands: generate, train, predict, report.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace egap::cli
