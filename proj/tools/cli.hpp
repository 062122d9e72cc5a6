#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace glbi::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;  // bad flags, invalid data, failed numerics
inline constexpr int kExitIo = 2;     // unreadable or unwritable files

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace glbi::cli
