#pragma once

#include <ostream>

namespace cfs::cli {

// Entry point of cfslab. Exit codes: 0 success, 1 module error, 2 bad
// configuration or command line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cfs::cli
