// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#include "raylaplace/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return raylaplace::run_cli(argc, argv, std::cout, std::cerr); }
