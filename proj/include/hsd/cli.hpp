#pragma once

#include <string>
#include <vector>

namespace hsd::cli {

// Runs one subcommand (args exclude the program name). Exit codes: 0 on
// success, 1 on user error, 2 on internal error.
int dispatch(const std::vector<std::string>& args);

}  // namespace hsd::cli
