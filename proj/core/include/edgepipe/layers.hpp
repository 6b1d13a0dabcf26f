// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgepipe/prng.hpp"
#include "edgepipe/tensor.hpp"

namespace edgepipe {

enum class LayerKind : std::uint8_t {
  kLinear = 1,
  kConv2d = 2,
  kReLU = 3,
  kDropout = 4,
  kResidualAdd = 5,
  kGlobalAvgPool = 6,
  kSoftmaxXent = 7,
};

const char* layer_kind_name(LayerKind kind) noexcept;

// One layer of the fixed layer set. Fields not used by a kind stay at their
// defaults; parameters live outside the spec (see ModelWeights).
struct LayerSpec {
  LayerKind kind = LayerKind::kReLU;
  std::size_t in = 0;      // Linear in-features, Conv2d in-channels
  std::size_t out = 0;     // Linear out-features, Conv2d out-channels
  std::size_t kernel = 0;  // Conv2d square kernel
  std::size_t stride = 1;
  std::size_t pad = 0;
  double rate = 0.0;       // Dropout
  std::size_t skip = 0;    // ResidualAdd: index of the layer whose output is added

  static LayerSpec linear(std::size_t in, std::size_t out);
  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t k,
                          std::size_t stride = 1, std::size_t pad = 0);
  static LayerSpec relu();
  static LayerSpec dropout(double rate);
  static LayerSpec residual_add(std::size_t skip_source);
  static LayerSpec global_avg_pool();
  static LayerSpec softmax_xent();

  // Throws kInvalidArgument when hyperparameters are out of range.
  void validate() const;

  std::vector<Shape> param_shapes() const;
  std::size_t param_count() const;

  // Output shape for `input`; throws kShapeMismatch naming the layer kind.
  // SoftmaxXent reports the probability shape (labels absent).
  Shape output_shape(const Shape& input) const;

  // Config-file syntax, e.g. "Conv2d(8,8,3,1,1)" or "ResidualAdd skip=4".
  std::string to_string() const;

  bool operator==(const LayerSpec&) const = default;
};

struct LayerContext {
  std::uint64_t seed = 0;
  std::uint64_t batch = 0;
  std::uint64_t microbatch = 0;
  std::size_t layer_index = 0;
  bool training = true;
  const Tensor* labels = nullptr;  // SoftmaxXent, I64 class ids, shape (N)
  const Tensor* skip = nullptr;    // ResidualAdd, output of the skip source
};

struct LayerCache {
  LayerKind kind = LayerKind::kReLU;
  Tensor input;
  Tensor aux;     // dropout mask, or softmax probabilities
  Tensor labels;  // SoftmaxXent
  bool has_labels = false;
  bool valid = false;
};

struct LayerForward {
  Tensor output;
  LayerCache cache;
};

struct LayerGrads {
  Tensor grad_input;
  Tensor grad_skip;  // ResidualAdd only
  std::vector<Tensor> param_grads;
};

LayerForward layer_forward(const LayerSpec& layer, std::span<const Tensor> params,
                           const Tensor& input, const LayerContext& ctx);

// `grad_out` is the gradient w.r.t. the layer output (a scalar for
// SoftmaxXent in training mode).
LayerGrads layer_backward(const LayerSpec& layer, std::span<const Tensor> params,
                          const Tensor& grad_out, const LayerCache& cache);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
std::vector<Tensor> init_params(const LayerSpec& layer, DType dtype, Prng& prng);

}  // namespace edgepipe
