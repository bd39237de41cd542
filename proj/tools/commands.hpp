#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace soilgen::cli {

// Runs the tool with argv[1..] as `args`. Returns the exit status: 0 success,
// 1 runtime failure, 2 usage or configuration error. Failures print one line
// "error: kind=<kind> message=<text>" to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace soilgen::cli
