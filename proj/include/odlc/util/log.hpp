#pragma once

#include <spdlog/spdlog.h>

namespace odlc::log {

using spdlog::debug;
using spdlog::error;
using spdlog::info;
using spdlog::warn;

// Routes the default logger to standard error so standard output stays
// machine-readable. `level` is a spdlog level name ("info", "warn", ...).
void init(const std::string& level = "warn");

}  // namespace odlc::log
