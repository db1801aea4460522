#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace thetaexp::cli {

// Runs one command line (without the program name). Records go to `out` or to
// the --out file; errors go to `err` as a JSON record.
// Returns 0 on success, 2 on usage errors, 1 on domain or numerical errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace thetaexp::cli
