// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "edgepipe/layers.hpp"
#include "edgepipe/tensor.hpp"

namespace edgepipe {

// Parameters of every layer, indexed by layer; parameterless layers hold an
// empty list.
using ModelWeights = std::vector<std::vector<Tensor>>;

struct SkipEdge {
  std::size_t source = 0;  // layer whose output is added
  std::size_t add = 0;     // the ResidualAdd layer

  bool operator==(const SkipEdge&) const = default;
};

struct ModelGraph {
  std::string name;
  Shape input_shape;             // one microbatch, batch axis first
  std::vector<LayerSpec> layers;
  std::vector<Shape> output_shapes;  // filled by propagate_shapes()

  std::size_t size() const noexcept { return layers.size(); }
  std::vector<SkipEdge> skip_edges() const;

  // Input of layer `i` (the graph input for i == 0).
  const Shape& input_of(std::size_t i) const;
  // Activation crossing a cut: input of layer `cut`.
  const Shape& cut_activation(std::size_t cut) const { return input_of(cut); }

  // 0 < cut < size() and no skip edge spans it.
  bool is_legal_cut(std::size_t cut) const;
  std::vector<std::size_t> legal_cuts() const;

  std::size_t param_count() const;
  bool ends_with_loss() const;

  // Validates layers and skip edges and recomputes output_shapes. Shape
  // errors name the offending layer.
  void propagate_shapes();
  // Same graph with the microbatch axis resized.
  ModelGraph with_batch(std::size_t n) const;

  std::string to_config() const;
};

// Line format: `name <id>`, `input <d0>x<d1>x...`, `<i>: <Kind>(<args>) [skip=<j>]`.
// `#` starts a comment. Errors carry the 1-based line number.
ModelGraph parse_model_config(std::string_view text);
ModelGraph load_model_config(const std::filesystem::path& path);

// Deterministic initialization from the reserved init stream of `seed`.
ModelWeights init_weights(const ModelGraph& graph, std::uint64_t seed, DType dtype = DType::kF32);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace edgepipe
