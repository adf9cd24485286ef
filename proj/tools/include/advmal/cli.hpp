#pragma once

#include <string>
#include <vector>

namespace advmal::cli {

// Exit codes of the advmal tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;     // bad flags or configuration
inline constexpr int kExitMismatch = 3;  // checkpoint/dataset version or shape mismatch

/// Runs the command line `args` (args[0] is the program name): one of the
/// subcommands gen, train, attack, evaluate, report.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace advmal::cli
