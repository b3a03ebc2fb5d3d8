// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Thin wrapper over spdlog. Verbosity comes from EPIFORGE_LOG
// (trace|debug|info|warn|error|off; default warn).

#include <spdlog/spdlog.h>

#include <memory>
#include <utility>

namespace epiforge::log {

std::shared_ptr<spdlog::logger> logger();
/// Re-reads EPIFORGE_LOG.
void configure_from_env();

template <class... Args>
void debug(fmt::format_string<Args...> fmt, Args&&... args) {
  logger()->debug(fmt, std::forward<Args>(args)...);
}

template <class... Args>
void info(fmt::format_string<Args...> fmt, Args&&... args) {
  logger()->info(fmt, std::forward<Args>(args)...);
}

template <class... Args>
void warn(fmt::format_string<Args...> fmt, Args&&... args) {
  logger()->warn(fmt, std::forward<Args>(args)...);
}

template <class... Args>
void error(fmt::format_string<Args...> fmt, Args&&... args) {
  logger()->error(fmt, std::forward<Args>(args)...);
}

}  // namespace epiforge::log
