#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace evote::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIntegrity = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `evote` invocation. `args` excludes the program name.
/// Returns kExitOk, kExitIntegrity (integrity or validation failure) or kExitUsage.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace evote::cli
