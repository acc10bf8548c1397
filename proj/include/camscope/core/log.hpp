#pragma once

#include <atomic>
#include <cstdio>
#include <string>

namespace camscope {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };

inline std::atomic<LogLevel>& log_level() {
    static std::atomic<LogLevel> level{LogLevel::info};
    return level;
}

inline void set_log_level(LogLevel l) { log_level().store(l); }

inline bool parse_log_level(const std::string& s, LogLevel& out) {
    if (s == "debug") out = LogLevel::debug;
    else if (s == "info") out = LogLevel::info;
    else if (s == "warn") out = LogLevel::warn;
    else if (s == "error") out = LogLevel::error;
    else return false;
    return true;
}

inline void log_at(LogLevel l, const char* tag, const std::string& msg) {
    if (l < log_level().load()) return;
    std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
}

inline void log_debug(const std::string& msg) { log_at(LogLevel::debug, "debug", msg); }
inline void log_info(const std::string& msg) { log_at(LogLevel::info, "info", msg); }
inline void log_warn(const std::string& msg) { log_at(LogLevel::warn, "warn", msg); }
inline void log_error(const std::string& msg) { log_at(LogLevel::error, "error", msg); }

}  // namespace camscope
