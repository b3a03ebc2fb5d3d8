// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "epiforge/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>
#include <mutex>

namespace epiforge::log {

namespace {

std::shared_ptr<spdlog::logger> make_logger() {
  auto sink = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
  auto l = std::make_shared<spdlog::logger>("epiforge", sink);
  l->set_pattern("[%H:%M:%S] [%^%l%$] %v");
  return l;
}

}  // namespace

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = make_logger();
    const char* env = std::getenv("EPIFORGE_LOG");
    l->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
    return l;
  }();
  return instance;
}

void configure_from_env() {
  const char* env = std::getenv("EPIFORGE_LOG");
  logger()->set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

}  // namespace epiforge::log
