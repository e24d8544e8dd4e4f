#include "structsql/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace structsql::log {

namespace {
std::atomic<Level> g_level{Level::Info};
std::mutex g_mutex;
}  // namespace

void set_level(Level level) { g_level.store(level); }
Level level() { return g_level.load(); }

void write(Level lvl, std::string_view message) {
    if (lvl < g_level.load()) return;
    static constexpr const char* names[] = {"debug", "info", "warn", "error"};
    std::lock_guard lock(g_mutex);
    std::cerr << "[structsql " << names[static_cast<int>(lvl)] << "] " << message << '\n';
}

}  // namespace structsql::log
