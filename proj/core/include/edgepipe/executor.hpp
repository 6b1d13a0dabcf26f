// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <vector>

#include "edgepipe/layers.hpp"
#include "edgepipe/model_graph.hpp"

namespace edgepipe {

// A contiguous run of layers [first_layer, first_layer + layers.size()) with
// its parameters. Skip indices stay global.
struct Stage {
  std::size_t first_layer = 0;
  Shape input_shape;
  std::vector<LayerSpec> layers;
  ModelWeights params;

  std::size_t end_layer() const noexcept { return first_layer + layers.size(); }
  bool ends_with_loss() const noexcept {
    return !layers.empty() && layers.back().kind == LayerKind::kSoftmaxXent;
  }
  Shape output_shape() const;
  std::size_t param_tensor_count() const;

  static Stage slice(const ModelGraph& graph, const ModelWeights& weights, std::size_t begin,
                     std::size_t end);
};

struct StepKey {
  std::uint64_t seed = 0;
  std::uint64_t batch = 0;
  std::uint64_t microbatch = 0;
  bool training = true;
};

// Everything a microbatch's backward needs from its forward.
struct StageTape {
  std::vector<LayerCache> caches;
  std::vector<Tensor> outputs;  // per layer
  Tensor input;
  Tensor output;  // last layer output (the loss when the stage ends with it)
};

struct StageGrads {
  Tensor grad_input;
  ModelWeights param_grads;  // same layout as Stage::params
};

StageTape stage_forward(const Stage& stage, const Tensor& input, const StepKey& key,
                        const Tensor* labels = nullptr);

// `grad_output` is the gradient w.r.t. the stage output; stages ending in
// SoftmaxXent take a scalar one.
StageGrads stage_backward(const Stage& stage, const StageTape& tape, const Tensor& grad_output);

// Scalar 1 in the stage dtype.
Tensor unit_seed_grad(DType dtype);

// Running sum of microbatch gradients in arrival order, reduced to the mean.
class GradAccumulator {
 public:
  void add(const ModelWeights& grads);
  std::size_t count() const noexcept { return count_; }
  // Sum divided by count; throws kNoGrads when empty.
  ModelWeights mean() const;
  void clear() noexcept;
  const ModelWeights& sum() const noexcept { return sum_; }

 private:
  ModelWeights sum_;
  std::size_t count_ = 0;
};

void apply_sgd(ModelWeights& params, const ModelWeights& grads, double lr);

// Per-layer cost measured as the median over `repeats` forward and backward
// runs of one microbatch.
struct MeasuredCosts {
  std::vector<double> forward;
  std::vector<double> backward;
};
MeasuredCosts measure_layer_costs(const ModelGraph& graph, const ModelWeights& weights,
                                  std::uint64_t seed, int repeats = 3);

// Synthetic training data: inputs and class labels from the reserved data
// stream, identical wherever they are generated.
struct Batch {
  Tensor inputs;  // (M * mb, ...)
  Tensor labels;  // I64 (M * mb)
};
Batch synthetic_batch(const ModelGraph& graph, std::uint64_t seed, std::uint64_t batch,
                      std::size_t microbatches, DType dtype = DType::kF32);
std::size_t class_count(const ModelGraph& graph);

}  // namespace edgepipe
