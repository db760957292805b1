#pragma once

#include <string>
#include <vector>

namespace fabtwin::cli {

/// Exit codes: 0 success, 1 validation error (bad flags, configs, inputs),
/// 2 runtime failure.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace fabtwin::cli
