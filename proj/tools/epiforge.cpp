// Copyright 2026 The epiforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "epiforge/cli.hpp"

int main(int argc, char** argv) { return epiforge::cli::run(argc, argv, std::cout, std::cerr); }
