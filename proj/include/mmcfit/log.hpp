#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string>

namespace mmc {

enum class LogLevel { Quiet = 0, Warning = 1, Info = 2, Debug = 3 };

inline std::atomic<int>& log_level_storage() {
  static std::atomic<int> level{static_cast<int>(LogLevel::Warning)};
  return level;
}

inline void set_log_level(LogLevel level) { log_level_storage() = static_cast<int>(level); }
inline bool log_enabled(LogLevel level) { return log_level_storage() >= static_cast<int>(level); }

inline void log_line(const std::string& line) {
  static std::mutex m;
  std::lock_guard<std::mutex> lock(m);
  std::cerr << line << '\n';
}

inline void log_warning(const std::string& msg) {
  if (log_enabled(LogLevel::Warning)) log_line("warning: " + msg);
}
inline void log_info(const std::string& msg) {
  if (log_enabled(LogLevel::Info)) log_line(msg);
}
inline void log_debug(const std::string& msg) {
  if (log_enabled(LogLevel::Debug)) log_line(msg);
}

}  // namespace mmc
