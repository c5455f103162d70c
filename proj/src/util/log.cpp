#include "odlc/util/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

namespace odlc::log {

void init(const std::string& level) {
  auto logger = spdlog::get("odlc");
  if (!logger) logger = spdlog::stderr_color_mt("odlc");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace odlc::log
