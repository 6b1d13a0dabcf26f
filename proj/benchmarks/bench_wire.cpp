// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include <benchmark/benchmark.h>

#include "edgepipe/wire.hpp"

namespace edgepipe {
namespace {

void BM_EncodeTensor(benchmark::State& state) {
  const Tensor t(DType::kF32, {static_cast<std::size_t>(state.range(0))});
  for (auto _ : state) benchmark::DoNotOptimize(wire::encode_tensor(t));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(t.raw_bytes().size()));
}
BENCHMARK(BM_EncodeTensor)->Arg(1 << 10)->Arg(1 << 16)->Arg(1 << 20);

void BM_DecodeTensor(benchmark::State& state) {
  const Bytes b = wire::encode_tensor(Tensor(DType::kF32, {static_cast<std::size_t>(state.range(0))}));
  for (auto _ : state) benchmark::DoNotOptimize(wire::decode_tensor(std::span<const std::uint8_t>(b)));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(b.size()));
}
BENCHMARK(BM_DecodeTensor)->Arg(1 << 10)->Arg(1 << 16)->Arg(1 << 20);

}  // namespace
}  // namespace edgepipe
