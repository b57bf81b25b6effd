#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mgvae::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

// Entry point of the `mgvae` tool. Subcommands: train, generate, evaluate,
// linkpred, cluster. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
// Same with the arguments after the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mgvae::cli
