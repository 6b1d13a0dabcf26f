// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace edgepipe::cli {

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
// `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Closest candidate by edit distance, or empty when nothing is close.
std::string suggest(const std::string& word, const std::vector<std::string>& candidates);

}  // namespace edgepipe::cli
