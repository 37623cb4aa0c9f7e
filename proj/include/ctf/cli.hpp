#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctf::cli {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 64;
constexpr int kExitData = 65;
constexpr int kExitInternal = 70;
constexpr int kExitIo = 74;

/// Runs one command line (without the program name). `check` returns the
/// verdict code 0/1/2 on success.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctf::cli
