#pragma once

#include <memory>
#include <string>

#include <spdlog/spdlog.h>

namespace hsps {

// Shared stderr logger. Verbosity comes from the HSPS_LOG environment
// variable (trace, debug, info, warn, error, off); default is warn.
spdlog::logger& logger();

// Re-reads HSPS_LOG. Called once by the CLI before dispatch.
void configure_logging_from_env();

}  // namespace hsps
