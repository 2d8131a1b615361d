#pragma once

// Minimal stderr logger.  Verbosity is controlled by the MASLOV_LOG
// environment variable: unset -> warnings only, "info", or "debug".

#include <cstdio>
#include <cstdlib>
#include <string>

namespace maslov {

enum class LogLevel { Warn = 0, Info = 1, Debug = 2 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("MASLOV_LOG");
    if (env == nullptr) return LogLevel::Warn;
    const std::string v(env);
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    return LogLevel::Warn;
  }();
  return level;
}

inline void log_message(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(log_level())) {
    const char* tag = level == LogLevel::Debug  ? "debug"
                      : level == LogLevel::Info ? "info"
                                                : "warn";
    std::fprintf(stderr, "[maslov:%s] %s\n", tag, msg.c_str());
  }
}

inline void log_info(const std::string& msg) { log_message(LogLevel::Info, msg); }
inline void log_debug(const std::string& msg) { log_message(LogLevel::Debug, msg); }
inline void log_warn(const std::string& msg) { log_message(LogLevel::Warn, msg); }

}  // namespace maslov
