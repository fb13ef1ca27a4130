#ifndef SOPE_TOOLS_CLI_HPP
#define SOPE_TOOLS_CLI_HPP

#include "sope/error.hpp"

#include <string>
#include <vector>

namespace sope::cli {

/// Exit codes. Library errors map to kErrorBase + the ErrorCode value.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;   // check Violated, reproduction below threshold, F(t0) != 1
inline constexpr int kExitUsage = 2;
inline constexpr int kExitUnknown = 3;  // check could neither certify nor refute
inline constexpr int kErrorBase = 10;

int exit_code(ErrorCode code) noexcept;

/// args excludes the program name.
int run(const std::vector<std::string>& args);

} // namespace sope::cli

#endif
