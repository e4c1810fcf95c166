#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gridrag::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kDegraded = 1;
inline constexpr int kUsage = 2;

// `args` excludes the program name. mock-serve blocks until SIGINT/SIGTERM.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gridrag::cli
