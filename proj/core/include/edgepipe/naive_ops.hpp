// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include "edgepipe/tensor.hpp"

// Second, deliberately naive implementation of every op in the layer set.
// These are the "other framework" in the dual-implementation check: written
// with direct index arithmetic and no shared helpers with ops.cpp/layers.cpp.
namespace edgepipe::naive {

// Explicit multi-index loops; same per-element summation order as the
// production matmul, so results are expected to match exactly.
Tensor matmul(const Tensor& a, const Tensor& b);

// Direct cross-correlation, one accumulator per output element.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);

// x * (1 / keep_prob) on kept elements.
Tensor dropout_masked(const Tensor& x, const Tensor& mask, double rate);

// The scaling bug this harness exists to catch: kept elements multiplied by
// 1 / rate instead of 1 / (1 - rate). Test fixture only.
Tensor dropout_masked_inverse_rate(const Tensor& x, const Tensor& mask, double rate);

// Mean cross-entropy evaluated in double precision, returned in x's dtype.
Tensor softmax_xent(const Tensor& logits, const Tensor& labels);

Tensor global_avg_pool(const Tensor& x);

Tensor residual_add(const Tensor& x, const Tensor& skip);

}  // namespace edgepipe::naive
