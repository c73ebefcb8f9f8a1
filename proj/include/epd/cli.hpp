#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace epd {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  /// Bad command line or invalid parameter values.
  kExitUsage = 2,
  /// Dataset could not be read or failed validation.
  kExitData = 3,
  /// A numerical step failed (degenerate matrix, quadrature, estimation).
  kExitNumerical = 4,
};

/// Runs one command. args excludes the program name. The result (or a
/// structured error document) is written to out; help text goes to out and
/// human-readable error messages to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace epd
