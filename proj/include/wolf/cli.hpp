// Copyright 2026 The Wolf Captioning Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wolf::cli {

/// Entry point of the `wolf` tool. Returns the process exit code: 0 when
/// every item succeeded, 1 when some failed, 2 for usage or config errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wolf::cli
