// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace epiforge::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// "8-17" or "12" -> inclusive week range. Throws ConfigError.
std::pair<int, int> parse_week_range(const std::string& text);

/// Comma-separated list with empty items removed.
std::vector<std::string> split_list(const std::string& text);

}  // namespace epiforge::cli
