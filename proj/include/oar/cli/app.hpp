#pragma once

#include <ostream>

namespace oar::cli {

/// Entry point of the oar-evalkit command line. Returns the process exit
/// code: 0 success, 1 validation, 2 I/O, 3 computation.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace oar::cli
