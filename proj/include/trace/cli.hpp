#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace trace::cli {

// Runs one command line (without the program name). Returns the exit status;
// diagnostics and usage go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trace::cli
