// Copyright 2026 The raylaplace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace raylaplace {

/// Entry point of the raylaplace command line tool. Returns the process exit
/// status; failures print one line "error: <category>: <message>" to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace raylaplace
