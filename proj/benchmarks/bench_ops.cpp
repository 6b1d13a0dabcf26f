// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include <benchmark/benchmark.h>

#include "edgepipe/layers.hpp"
#include "edgepipe/ops.hpp"
#include "edgepipe/prng.hpp"

namespace edgepipe {
namespace {

Tensor filled(Shape shape, Prng& prng) {
  Tensor t(DType::kF32, std::move(shape));
  for (auto& v : t.mutable_values<float>()) v = static_cast<float>(prng.next_uniform(-1.0, 1.0));
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Prng prng(1);
  const Tensor a = filled({n, n}, prng);
  const Tensor b = filled({n, n}, prng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul_broadcast(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

// One mini-resnet body conv: 16 -> 16 channels, 3x3, 16x16 maps.
void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  Prng prng(2);
  const LayerSpec conv = LayerSpec::conv2d(16, 16, 3, 1, 1);
  const auto params = init_params(conv, DType::kF32, prng);
  const Tensor x = filled({batch, 16, 16, 16}, prng);
  LayerContext ctx;
  ctx.training = true;
  for (auto _ : state) {
    const LayerForward f = layer_forward(conv, params, x, ctx);
    benchmark::DoNotOptimize(layer_backward(conv, params, f.output, f.cache));
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(1)->Arg(4);

}  // namespace
}  // namespace edgepipe
