#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace iobs {

// Log level comes from the IOBS_LOG environment variable: off | info | debug.
inline int log_level() {
  static int level = [] {
    const char* v = std::getenv("IOBS_LOG");
    if (!v || std::strcmp(v, "off") == 0) return 0;
    if (std::strcmp(v, "debug") == 0) return 2;
    return 1;
  }();
  return level;
}

template <typename... Args>
void log_info(const char* fmt, Args... args) {
  if (log_level() >= 1) {
    std::fprintf(stderr, "[iobs] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

template <typename... Args>
void log_debug(const char* fmt, Args... args) {
  if (log_level() >= 2) {
    std::fprintf(stderr, "[iobs:debug] ");
    std::fprintf(stderr, fmt, args...);
    std::fprintf(stderr, "\n");
  }
}

}  // namespace iobs
