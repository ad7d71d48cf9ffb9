#pragma once

#include <iosfwd>

namespace sst {

/// Runs one `sst` command line. Returns the process exit code:
/// 0 success, 2 input/config, 3 geometry validity, 4 unphysical state,
/// 5 identifiability.
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace sst
