#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace roler::logging {

enum class Level { quiet = 0, error = 1, info = 2, debug = 3 };

// Verbosity from ROLER_LAB_LOG (quiet|error|info|debug or 0..3); default info.
inline Level level() {
    static Level lv = [] {
        const char* env = std::getenv("ROLER_LAB_LOG");
        if (!env) return Level::info;
        std::string v(env);
        if (v == "quiet" || v == "0") return Level::quiet;
        if (v == "error" || v == "1") return Level::error;
        if (v == "debug" || v == "3") return Level::debug;
        return Level::info;
    }();
    return lv;
}

inline void info(const std::string& msg) {
    if (level() >= Level::info) std::cerr << "[info] " << msg << '\n';
}

inline void error(const std::string& msg) {
    if (level() >= Level::error) std::cerr << "[error] " << msg << '\n';
}

inline void debug(const std::string& msg) {
    if (level() >= Level::debug) std::cerr << "[debug] " << msg << '\n';
}

}  // namespace roler::logging
