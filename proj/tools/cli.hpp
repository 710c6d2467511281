#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace weakclr::cli {

// Runs one command line (args excludes the program name). Failures are
// reported on err as {"error": code, "message": ...} and yield a nonzero
// status: 2 for usage errors, 1 for everything else.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace weakclr::cli
