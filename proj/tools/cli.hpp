#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rt2v {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one verb. `args` excludes the program name. Results go to `out`;
/// usage text and structured errors go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rt2v
