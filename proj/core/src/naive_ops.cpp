// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/naive_ops.hpp"

#include <cmath>

namespace edgepipe::naive {

namespace {

std::vector<double> to_doubles(const Tensor& t) {
  std::vector<double> v(t.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.at_as_double(i);
  return v;
}

Tensor from_doubles(DType dtype, const Shape& shape, const std::vector<double>& v) {
  Tensor out(dtype, shape);
  dispatch_float(dtype, [&]<typename T>() {
    auto o = out.mutable_values<T>();
    for (std::size_t i = 0; i < v.size(); ++i) o[i] = static_cast<T>(v[i]);
  });
  return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2 || sa[sa.size() - 1] != sb[sb.size() - 2]) {
    fail(Errc::kShapeMismatch, "naive matmul: " + shape_str(sa) + " x " + shape_str(sb));
  }
  const std::size_t m = sa[sa.size() - 2], k = sa[sa.size() - 1], n = sb[sb.size() - 1];
  const std::size_t la = sa.size() - 2, lb = sb.size() - 2;
  const std::size_t lo = la > lb ? la : lb;
  Shape out_shape(lo);
  for (std::size_t i = 0; i < lo; ++i) {
    const std::size_t da = i + la >= lo ? sa[i + la - lo] : 1;
    const std::size_t db = i + lb >= lo ? sb[i + lb - lo] : 1;
    if (da != db && da != 1 && db != 1) {
      fail(Errc::kShapeMismatch, "naive matmul broadcast: " + shape_str(sa) + " x " + shape_str(sb));
    }
    out_shape[i] = da > db ? da : db;
  }
  std::size_t batches = 1;
  for (auto d : out_shape) batches *= d;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out(a.dtype(), out_shape);

  dispatch_float(a.dtype(), [&]<typename T>() {
    auto av = a.values<T>();
    auto bv = b.values<T>();
    auto ov = out.mutable_values<T>();
    std::vector<std::size_t> idx(lo);
    for (std::size_t batch = 0; batch < batches; ++batch) {
      // decode batch -> multi-index
      std::size_t rem = batch;
      for (std::size_t ax = lo; ax-- > 0;) {
        idx[ax] = rem % out_shape[ax];
        rem /= out_shape[ax];
      }
      std::size_t ia = 0, ib = 0;
      for (std::size_t ax = 0; ax < lo; ++ax) {
        if (ax + la >= lo) {
          const std::size_t d = sa[ax + la - lo];
          ia = ia * d + (d == 1 ? 0 : idx[ax]);
        }
        if (ax + lb >= lo) {
          const std::size_t d = sb[ax + lb - lo];
          ib = ib * d + (d == 1 ? 0 : idx[ax]);
        }
      }
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          T acc = T(0);
          for (std::size_t p = 0; p < k; ++p) {
            acc += av[ia * m * k + i * k + p] * bv[ib * k * n + p * n + j];
          }
          ov[batch * m * n + i * n + j] = acc;
        }
      }
    }
  });
  return out;
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = weight.dim(0), K = weight.dim(2);
  const std::size_t OH = (H + 2 * pad - K) / stride + 1;
  const std::size_t OW = (W + 2 * pad - K) / stride + 1;
  Tensor out(x.dtype(), {N, O, OH, OW});
  dispatch_float(x.dtype(), [&]<typename T>() {
    auto xv = x.values<T>();
    auto wv = weight.values<T>();
    auto bv = bias.values<T>();
    auto ov = out.mutable_values<T>();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t o = 0; o < O; ++o)
        for (std::size_t oy = 0; oy < OH; ++oy)
          for (std::size_t ox = 0; ox < OW; ++ox) {
            T acc = T(0);
            for (std::size_t c = 0; c < C; ++c)
              for (std::size_t ky = 0; ky < K; ++ky)
                for (std::size_t kx = 0; kx < K; ++kx) {
                  const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                  const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                  if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W))
                    continue;
                  acc += wv[((o * C + c) * K + ky) * K + kx] * xv[((n * C + c) * H + iy) * W + ix];
                }
            ov[((n * O + o) * OH + oy) * OW + ox] = acc + bv[o];
          }
  });
  return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  const std::size_t n = x.dim(0);
  const std::size_t in = weight.dim(0), outf = weight.dim(1);
  if (x.numel() != n * in) fail(Errc::kShapeMismatch, "naive linear input " + shape_str(x.shape()));
  const auto xv = to_doubles(x);
  const auto wv = to_doubles(weight);
  const auto bv = to_doubles(bias);
  std::vector<double> y(n * outf);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < outf; ++j) {
      double acc = bv[j];
      for (std::size_t p = 0; p < in; ++p) acc += xv[i * in + p] * wv[p * outf + j];
      y[i * outf + j] = acc;
    }
  return from_doubles(x.dtype(), {n, outf}, y);
}

Tensor relu(const Tensor& x) {
  auto v = to_doubles(x);
  for (auto& e : v) e = e < 0.0 ? 0.0 : e;
  return from_doubles(x.dtype(), x.shape(), v);
}

Tensor dropout_masked(const Tensor& x, const Tensor& mask, double rate) {
  auto v = to_doubles(x);
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = mask.at_as_double(i) != 0.0 ? v[i] * scale : 0.0;
  return from_doubles(x.dtype(), x.shape(), v);
}

Tensor dropout_masked_inverse_rate(const Tensor& x, const Tensor& mask, double rate) {
  auto v = to_doubles(x);
  const double scale = 1.0 / rate;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = mask.at_as_double(i) != 0.0 ? v[i] * scale : 0.0;
  return from_doubles(x.dtype(), x.shape(), v);
}

Tensor softmax_xent(const Tensor& logits, const Tensor& labels) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  const auto x = to_doubles(logits);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(x[i * k + j]);
    const auto label = static_cast<std::size_t>(labels.at_as_double(i));
    total += -std::log(std::exp(x[i * k + label]) / z);
  }
  return from_doubles(logits.dtype(), {}, {total / static_cast<double>(n)});
}

Tensor global_avg_pool(const Tensor& x) {
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t area = x.numel() / (n * c);
  const auto v = to_doubles(x);
  std::vector<double> y(n * c, 0.0);
  for (std::size_t i = 0; i < n * c; ++i) {
    for (std::size_t j = 0; j < area; ++j) y[i] += v[i * area + j];
    y[i] /= static_cast<double>(area);
  }
  return from_doubles(x.dtype(), {n, c}, y);
}

Tensor residual_add(const Tensor& x, const Tensor& skip) {
  auto a = to_doubles(x);
  const auto b = to_doubles(skip);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return from_doubles(x.dtype(), x.shape(), a);
}

}  // namespace edgepipe::naive
