#include "sope/log.hpp"

#include "sope/error.hpp"

#include <atomic>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string>

namespace sope {

namespace {

LogLevel from_env() noexcept {
    const char* v = std::getenv("SOPE_LOG");
    if (!v) return LogLevel::Quiet;
    try {
        return parse_log_level(v);
    } catch (const Error&) {
        return LogLevel::Quiet;
    }
}

std::atomic<int>& level_slot() {
    static std::atomic<int> slot{static_cast<int>(from_env())};
    return slot;
}

std::mutex& out_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

LogLevel log_level() noexcept { return static_cast<LogLevel>(level_slot().load()); }

void set_log_level(LogLevel level) noexcept { level_slot().store(static_cast<int>(level)); }

LogLevel parse_log_level(std::string_view text) {
    if (text == "quiet" || text.empty()) return LogLevel::Quiet;
    if (text == "info") return LogLevel::Info;
    if (text == "debug") return LogLevel::Debug;
    fail(ErrorCode::InvalidArgument, "unknown log level '" + std::string(text) + "' (quiet, info, debug)");
}

bool log_enabled(LogLevel level) noexcept { return level != LogLevel::Quiet && log_level() >= level; }

void log_line(LogLevel level, const char* fmt, ...) {
    if (!log_enabled(level)) return;
    std::lock_guard<std::mutex> lock(out_mutex());
    std::va_list args;
    va_start(args, fmt);
    std::vfprintf(stderr, fmt, args);
    va_end(args);
    std::fputc('\n', stderr);
}

} // namespace sope
