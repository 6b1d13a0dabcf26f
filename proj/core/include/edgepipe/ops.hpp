// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <span>

#include "edgepipe/prng.hpp"
#include "edgepipe/tensor.hpp"

namespace edgepipe {

// Standard broadcasting of leading axes: missing axes are prepended, size-1
// axes stretch. Throws kShapeMismatch naming both shapes on conflict.
Shape broadcast_shapes(const Shape& a, const Shape& b);

// Batched matrix product over the last two axes with broadcast leading axes.
// Each output element is accumulated from zero in ascending inner index.
Tensor matmul_broadcast(const Tensor& a, const Tensor& b);

struct DropoutResult {
  Tensor output;
  Tensor mask;  // U8, 1 = kept
};

// Inverted dropout: kept elements are divided by (1 - rate). The mask is drawn
// from `prng`, one draw per element in row-major order.
DropoutResult dropout(const Tensor& x, double rate, Prng& prng, bool training);

// Applies an existing mask with the same scaling; also the dropout backward map.
Tensor dropout_with_mask(const Tensor& x, const Tensor& mask, double rate);

// p <- p - lr * g elementwise, parameters visited in the given order.
void sgd_step(std::span<Tensor> params, std::span<const Tensor> grads, double lr);

// acc += x (same dtype and shape).
void add_inplace(Tensor& acc, const Tensor& x);

// Elementwise t / divisor.
Tensor divide_by(const Tensor& t, double divisor);

// Largest |a - b| and mean |a - b|, computed in double.
struct AbsDiff {
  double max = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};
AbsDiff abs_diff(const Tensor& a, const Tensor& b);

bool all_finite(const Tensor& t);

}  // namespace edgepipe
