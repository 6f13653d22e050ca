#pragma once

#include <ostream>
#include <span>
#include <string>

namespace lfm::cli {

/// Exit codes: 0 success, 1 usage/config error, 2 data or parse error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Entry point behind the `lfm` binary; `args` excludes the program name.
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace lfm::cli
