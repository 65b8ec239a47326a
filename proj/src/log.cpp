#include "crs/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace crs {
namespace {
std::atomic<int> g_level{static_cast<int>(LogLevel::warning)};
std::mutex g_mutex;
}  // namespace

void set_log_level(LogLevel level) { g_level = static_cast<int>(level); }
LogLevel log_level() { return static_cast<LogLevel>(g_level.load()); }

void log_warning(std::string_view message) {
  if (g_level < static_cast<int>(LogLevel::warning)) return;
  std::lock_guard lock(g_mutex);
  std::clog << "warning: " << message << '\n';
}

void log_info(std::string_view message) {
  if (g_level < static_cast<int>(LogLevel::info)) return;
  std::lock_guard lock(g_mutex);
  std::clog << message << '\n';
}

}  // namespace crs
