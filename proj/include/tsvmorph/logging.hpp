#pragma once

#include <string_view>

namespace tsvmorph {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

/// Lines below the threshold are dropped. Defaults to Info, or the value
/// of TSVMORPH_LOG (debug|info|warn|error|off).
void set_log_level(LogLevel level);
LogLevel log_level();

/// Writes "level: message" to stderr as one line; thread-safe.
void log(LogLevel level, std::string_view message);

}  // namespace tsvmorph
