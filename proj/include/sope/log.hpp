#ifndef SOPE_LOG_HPP
#define SOPE_LOG_HPP

#include <string_view>

namespace sope {

/// Read once from SOPE_LOG (quiet, info, debug); defaults to quiet.
/// Debug adds per-iteration interior point statistics.
enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level() noexcept;
void set_log_level(LogLevel level) noexcept;
LogLevel parse_log_level(std::string_view text); // throws InvalidArgument

bool log_enabled(LogLevel level) noexcept;
void log_line(LogLevel level, const char* fmt, ...) __attribute__((format(printf, 2, 3)));

} // namespace sope

#endif
