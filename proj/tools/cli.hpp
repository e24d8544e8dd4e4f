#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace structsql::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitShortfall = 2;  // sampler shortfall or failed verification

// Runs one subcommand; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace structsql::cli
