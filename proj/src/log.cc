#include "disparity_audit/log.h"

#include <cstdlib>
#include <memory>

#include "spdlog/sinks/stdout_color_sinks.h"
#include "spdlog/spdlog.h"

namespace disparity_audit::log {
namespace {

spdlog::logger& Logger() {
  static const std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_mt("disparity_audit");
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::warn);
    if (const char* level = std::getenv("DISPARITY_AUDIT_LOG")) {
      l->set_level(spdlog::level::from_str(level));
    }
    return l;
  }();
  return *logger;
}

}  // namespace

void Debug(std::string_view message) { Logger().debug(message); }
void Info(std::string_view message) { Logger().info(message); }
void Warn(std::string_view message) { Logger().warn(message); }

}  // namespace disparity_audit::log
