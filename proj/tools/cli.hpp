#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace exitguard::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntimeError = 1;
inline constexpr int kExitConfigError = 2;

/// Runs one CLI invocation. args[0] is the program name. Returns the process
/// exit status; failures write a single "exitguard: error[<kind>]: <message>"
/// line to `err`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace exitguard::cli
