#pragma once

#include <functional>
#include <string_view>

namespace weakclr {

enum class LogLevel { Quiet, Warn, Info, Debug };

void set_log_level(LogLevel level);
LogLevel log_level();

using LogSink = std::function<void(LogLevel, std::string_view)>;
// Redirects messages that pass the level filter; an empty sink restores stderr.
void set_log_sink(LogSink sink);

// Thread-safe, to stderr, prefixed with the elapsed wall time.
void log_debug(std::string_view message);
void log_info(std::string_view message);
void log_warn(std::string_view message);

} // namespace weakclr
