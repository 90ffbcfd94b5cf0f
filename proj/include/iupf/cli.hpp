#pragma once

#include <iosfwd>

namespace iupf::cli {

enum ExitCode : int {
    kSuccess = 0,
    kFailure = 1,
    kValidation = 2,
    kNonConvergence = 3,
};

/// Parses argv and runs one of: run, fields, report, sweep.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace iupf::cli
