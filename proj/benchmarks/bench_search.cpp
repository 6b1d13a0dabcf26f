// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "edgepipe/vector_index.hpp"

namespace edgepipe {
namespace {

void BM_VectorSearch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::string> texts;
  texts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) texts.push_back("document " + std::to_string(i) + " token" + std::to_string(i % 97));
  const VectorIndex index = build_index(texts, 64);
  const auto query = embed_text("document token42", 64);
  for (auto _ : state) benchmark::DoNotOptimize(vector_search(index, query, 5));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_VectorSearch)->Arg(100)->Arg(10000);

void BM_EmbedText(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(embed_text("thermal throttling in new phones", 64));
}
BENCHMARK(BM_EmbedText);

}  // namespace
}  // namespace edgepipe
