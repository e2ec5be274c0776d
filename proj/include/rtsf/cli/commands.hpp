#pragma once

#include <string>
#include <vector>

namespace rtsf::cli {

// Entry point shared by the binary and the tests. Returns the process exit
// code; all diagnostics go to the error stream with a stable code prefix.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace rtsf::cli
