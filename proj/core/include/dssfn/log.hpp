#pragma once

#include <string>

namespace dssfn::log {

enum class Level { error = 0, warn = 1, info = 2, debug = 3 };

// Threshold parsed once from the DSSFN_LOG environment variable
// ("error" | "warn" | "info" | "debug", or the matching digit).
// Defaults to warn when unset or unrecognized.
Level threshold();

bool enabled(Level level);

// Writes "[dssfn] <level>: <msg>\n" to stderr when level passes the threshold.
void write(Level level, const std::string& msg);

inline void error(const std::string& msg) { write(Level::error, msg); }
inline void warn(const std::string& msg) { write(Level::warn, msg); }
inline void info(const std::string& msg) { write(Level::info, msg); }
inline void debug(const std::string& msg) { write(Level::debug, msg); }

}  // namespace dssfn::log
