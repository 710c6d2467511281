#include "weakclr/log.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <mutex>
#include <string>

#include <cblas.h>

#include "weakclr/parallel.hpp"

namespace weakclr {

namespace {

std::mutex g_mutex;
LogLevel g_level = LogLevel::Info;
const auto g_start = std::chrono::steady_clock::now();
LogSink g_sink;

void emit(const char* tag, std::string_view message) {
    {
        std::lock_guard lock(g_mutex);
        if (g_sink) {
            g_sink(tag[0] == 'w' ? LogLevel::Warn : tag[0] == 'i' ? LogLevel::Info : LogLevel::Debug, message);
            return;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - g_start).count();
    std::lock_guard lock(g_mutex);
    std::fprintf(stderr, "[%8.1fs] %s %.*s\n", secs, tag, static_cast<int>(message.size()), message.data());
}

} // namespace

void set_log_level(LogLevel level) { g_level = level; }
void set_log_sink(LogSink sink) {
    std::lock_guard lock(g_mutex);
    g_sink = std::move(sink);
}
LogLevel log_level() { return g_level; }

void log_debug(std::string_view message) {
    if (g_level >= LogLevel::Debug) emit("debug", message);
}
void log_info(std::string_view message) {
    if (g_level >= LogLevel::Info) emit("info ", message);
}
void log_warn(std::string_view message) {
    if (g_level >= LogLevel::Warn) emit("warn ", message);
}

void set_compute_threads(int threads) { openblas_set_num_threads(threads < 1 ? 1 : threads); }

} // namespace weakclr
