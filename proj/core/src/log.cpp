#include "dssfn/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace dssfn::log {
namespace {

Level parse_env() {
  const char* raw = std::getenv("DSSFN_LOG");
  if (!raw) return Level::warn;
  if (!std::strcmp(raw, "error") || !std::strcmp(raw, "0")) return Level::error;
  if (!std::strcmp(raw, "warn") || !std::strcmp(raw, "1")) return Level::warn;
  if (!std::strcmp(raw, "info") || !std::strcmp(raw, "2")) return Level::info;
  if (!std::strcmp(raw, "debug") || !std::strcmp(raw, "3")) return Level::debug;
  return Level::warn;
}

const char* name_of(Level level) {
  switch (level) {
    case Level::error: return "error";
    case Level::warn: return "warn";
    case Level::info: return "info";
    case Level::debug: return "debug";
  }
  return "?";
}

}  // namespace

Level threshold() {
  static const Level cached = parse_env();
  return cached;
}

bool enabled(Level level) {
  return static_cast<int>(level) <= static_cast<int>(threshold());
}

void write(Level level, const std::string& msg) {
  if (!enabled(level)) return;
  std::fprintf(stderr, "[dssfn] %s: %s\n", name_of(level), msg.c_str());
}

}  // namespace dssfn::log
