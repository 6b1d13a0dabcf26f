// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  return edgepipe::cli::cli_main(argc, argv, std::cout, std::cerr);
}
