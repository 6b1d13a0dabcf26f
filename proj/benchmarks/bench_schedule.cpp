// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include <benchmark/benchmark.h>

#include "edgepipe/schedule.hpp"

namespace edgepipe {
namespace {

void BM_BuildAndSimulate(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  SlotDurations d;
  d.forward = d.backward = 0.025;
  d.fwdbwd = 0.05;
  d.send = d.recv = 0.001;
  for (auto _ : state) benchmark::DoNotOptimize(simulate(build_schedule(m), d));
}
BENCHMARK(BM_BuildAndSimulate)->Arg(8)->Arg(64)->Arg(512);

}  // namespace
}  // namespace edgepipe
