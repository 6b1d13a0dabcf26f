// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include <benchmark/benchmark.h>

// The distro's libbenchmark_main.a carries LTO bytecode from another gcc
// point release, so the entry point lives here instead.
BENCHMARK_MAIN();
