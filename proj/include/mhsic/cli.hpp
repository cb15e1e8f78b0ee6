#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mhsic::cli {

/// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDegenerate = 3;

/// Runs the command line; argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mhsic::cli
