#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ntg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// The ntg command line; args exclude the program name. Returns the exit
/// code: 0 success, 1 usage error, 2 data error.
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace ntg
