#pragma once

#include <spdlog/spdlog.h>

namespace stemc {

/// Sets the spdlog level from STEMC_LOG (trace, debug, info, warn, error, off).
/// Defaults to warn. Logs go to stderr.
void init_logging_from_env();

}  // namespace stemc
