// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/ops.hpp"

#include <algorithm>
#include <cmath>

namespace edgepipe {

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      fail(Errc::kShapeMismatch,
           "cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[i] = da == 1 ? db : da;
  }
  return out;
}

namespace {

// Maps each flat index over `out` leading axes to the flat batch index of an
// operand with leading shape `lead` (right-aligned, size-1 axes broadcast).
std::vector<std::size_t> batch_offsets(const Shape& out, const Shape& lead) {
  const std::size_t total = shape_numel(out);
  std::vector<std::size_t> offsets(total);
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = lead.size(); i-- > 0;) {
    const std::size_t axis = out.size() - lead.size() + i;
    strides[axis] = lead[i] == 1 ? 0 : stride;
    stride *= lead[i];
  }
  std::vector<std::size_t> idx(out.size(), 0);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t off = 0;
    for (std::size_t ax = 0; ax < out.size(); ++ax) off += idx[ax] * strides[ax];
    offsets[flat] = off;
    for (std::size_t ax = out.size(); ax-- > 0;) {
      if (++idx[ax] < out[ax]) break;
      idx[ax] = 0;
    }
  }
  return offsets;
}

template <typename T>
void gemm_accumulate(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
  // out must start zeroed; per element the products are added in ascending k.
  for (std::size_t i = 0; i < m; ++i) {
    T* row = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor matmul_broadcast(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    fail(Errc::kShapeMismatch, "matmul needs rank >= 2 operands, got " + shape_str(a.shape()) +
                                   " and " + shape_str(b.shape()));
  }
  if (a.dtype() != b.dtype()) {
    fail(Errc::kInvalidArgument, std::string("matmul dtype mismatch ") + dtype_name(a.dtype()) +
                                     " vs " + dtype_name(b.dtype()));
  }
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2);
  const std::size_t n = b.dim(b.rank() - 1);
  if (k != kb) {
    fail(Errc::kShapeMismatch, "matmul inner dimensions differ: " + shape_str(a.shape()) + " x " +
                                   shape_str(b.shape()));
  }
  const Shape lead_a(a.shape().begin(), a.shape().end() - 2);
  const Shape lead_b(b.shape().begin(), b.shape().end() - 2);
  Shape lead;
  try {
    lead = broadcast_shapes(lead_a, lead_b);
  } catch (const Error&) {
    fail(Errc::kShapeMismatch, "matmul leading axes conflict: " + shape_str(a.shape()) + " x " +
                                   shape_str(b.shape()));
  }
  Shape out_shape = lead;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out(a.dtype(), out_shape);
  const auto off_a = batch_offsets(lead, lead_a);
  const auto off_b = batch_offsets(lead, lead_b);

  dispatch_float(a.dtype(), [&]<typename T>() {
    auto av = a.values<T>();
    auto bv = b.values<T>();
    auto ov = out.mutable_values<T>();
    for (std::size_t batch = 0; batch < off_a.size(); ++batch) {
      gemm_accumulate(av.data() + off_a[batch] * m * k, bv.data() + off_b[batch] * k * n,
                      ov.data() + batch * m * n, m, k, n);
    }
  });
  return out;
}

DropoutResult dropout(const Tensor& x, double rate, Prng& prng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    fail(Errc::kInvalidArgument, "dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  Tensor mask(DType::kU8, x.shape());
  auto m = mask.mutable_values<std::uint8_t>();
  if (!training) {
    std::fill(m.begin(), m.end(), std::uint8_t{1});
    return {x, std::move(mask)};
  }
  for (auto& bit : m) bit = prng.next_unit() >= rate ? 1 : 0;
  Tensor out = dropout_with_mask(x, mask, rate);
  return {std::move(out), std::move(mask)};
}

Tensor dropout_with_mask(const Tensor& x, const Tensor& mask, double rate) {
  if (mask.shape() != x.shape()) {
    fail(Errc::kShapeMismatch,
         "dropout mask " + shape_str(mask.shape()) + " does not match " + shape_str(x.shape()));
  }
  Tensor out(x.dtype(), x.shape());
  dispatch_float(x.dtype(), [&]<typename T>() {
    const T keep = T(1) - static_cast<T>(rate);
    auto xv = x.values<T>();
    auto mv = mask.values<std::uint8_t>();
    auto ov = out.mutable_values<T>();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = mv[i] ? xv[i] / keep : T(0);
  });
  return out;
}

void sgd_step(std::span<Tensor> params, std::span<const Tensor> grads, double lr) {
  if (params.size() != grads.size()) {
    fail(Errc::kShapeMismatch, "sgd_step: " + std::to_string(params.size()) + " params but " +
                                   std::to_string(grads.size()) + " grads");
  }
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    fail(Errc::kInvalidArgument, "learning rate must be finite and >= 0");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || params[i].dtype() != grads[i].dtype()) {
      fail(Errc::kShapeMismatch, "sgd_step param " + std::to_string(i) + " " +
                                     shape_str(params[i].shape()) + " vs grad " +
                                     shape_str(grads[i].shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    dispatch_float(params[i].dtype(), [&]<typename T>() {
      const T step = static_cast<T>(lr);
      auto p = params[i].mutable_values<T>();
      auto g = grads[i].values<T>();
      for (std::size_t j = 0; j < p.size(); ++j) p[j] = p[j] - step * g[j];
    });
  }
}

void add_inplace(Tensor& acc, const Tensor& x) {
  if (acc.shape() != x.shape() || acc.dtype() != x.dtype()) {
    fail(Errc::kShapeMismatch,
         "add: " + shape_str(acc.shape()) + " vs " + shape_str(x.shape()));
  }
  dispatch_float(acc.dtype(), [&]<typename T>() {
    auto a = acc.mutable_values<T>();
    auto b = x.values<T>();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  });
}

Tensor divide_by(const Tensor& t, double divisor) {
  Tensor out(t.dtype(), t.shape());
  dispatch_float(t.dtype(), [&]<typename T>() {
    const T d = static_cast<T>(divisor);
    auto s = t.values<T>();
    auto o = out.mutable_values<T>();
    for (std::size_t i = 0; i < s.size(); ++i) o[i] = s[i] / d;
  });
  return out;
}

AbsDiff abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    fail(Errc::kShapeMismatch,
         "abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  AbsDiff d;
  d.count = a.numel();
  double sum = 0.0;
  for (std::size_t i = 0; i < d.count; ++i) {
    const double e = std::fabs(a.at_as_double(i) - b.at_as_double(i));
    d.max = std::max(d.max, e);
    sum += e;
  }
  d.mean = d.count ? sum / static_cast<double>(d.count) : 0.0;
  return d;
}

bool all_finite(const Tensor& t) {
  if (t.dtype() != DType::kF32 && t.dtype() != DType::kF64) return true;
  return dispatch_float(t.dtype(), [&]<typename T>() {
    for (T v : t.values<T>()) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  });
}

}  // namespace edgepipe
