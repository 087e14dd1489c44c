#include "tsvmorph/logging.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace tsvmorph {

namespace {

LogLevel initial_level() {
  const char* env = std::getenv("TSVMORPH_LOG");
  if (!env) return LogLevel::Info;
  const std::string v(env);
  if (v == "debug") return LogLevel::Debug;
  if (v == "warn") return LogLevel::Warn;
  if (v == "error") return LogLevel::Error;
  if (v == "off") return LogLevel::Off;
  return LogLevel::Info;
}

std::atomic<LogLevel>& level_ref() {
  static std::atomic<LogLevel> level{initial_level()};
  return level;
}

constexpr std::string_view name(LogLevel l) {
  switch (l) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warn";
    case LogLevel::Error: return "error";
    case LogLevel::Off: return "off";
  }
  return "info";
}

}  // namespace

void set_log_level(LogLevel level) { level_ref() = level; }
LogLevel log_level() { return level_ref(); }

void log(LogLevel level, std::string_view message) {
  if (level < level_ref().load()) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << name(level) << ": " << message << '\n';
}

}  // namespace tsvmorph
