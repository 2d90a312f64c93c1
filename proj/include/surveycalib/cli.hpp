#pragma once

#include <iosfwd>

namespace surveycalib {

/// Entry point of the `surveycalib` command-line tool. Returns the process
/// exit status: 0 on success, 1 on usage or input errors, 2 on numerical
/// failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace surveycalib
