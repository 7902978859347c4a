#include "hsps/log.hpp"

#include <cstdlib>

#include <spdlog/sinks/stdout_color_sinks.h>

namespace hsps {

namespace {

std::shared_ptr<spdlog::logger> make_logger()
{
    auto sink = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
    auto log = std::make_shared<spdlog::logger>("hsps", sink);
    log->set_pattern("[%l] %v");
    log->set_level(spdlog::level::warn);
    return log;
}

}  // namespace

spdlog::logger& logger()
{
    static std::shared_ptr<spdlog::logger> instance = make_logger();
    return *instance;
}

void configure_logging_from_env()
{
    const char* env = std::getenv("HSPS_LOG");
    if (env == nullptr) {
        return;
    }
    auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; keep warn for typos.
    if (level == spdlog::level::off && std::string(env) != "off") {
        level = spdlog::level::warn;
    }
    logger().set_level(level);
}

}  // namespace hsps
