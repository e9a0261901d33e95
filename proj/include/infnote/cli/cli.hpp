#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace infnote::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `infnote` invocation. `args` excludes the program name. Results go
/// to `out`; diagnostics to `err`, except that --json also reports errors on
/// `out` as {"error":{"code","detail"}}.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace infnote::cli
