#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xferod::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;  // bad flags, validation failures
inline constexpr int kExitIo = 3;     // unreadable or unwritable files

/// Runs one command line. args[0] is the program name. Reports go to `out`,
/// diagnostics and warnings to `err`. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace xferod::cli
