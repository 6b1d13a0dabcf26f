// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "edgepipe/ops.hpp"

namespace edgepipe {

const char* layer_kind_name(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::kLinear: return "Linear";
    case LayerKind::kConv2d: return "Conv2d";
    case LayerKind::kReLU: return "ReLU";
    case LayerKind::kDropout: return "Dropout";
    case LayerKind::kResidualAdd: return "ResidualAdd";
    case LayerKind::kGlobalAvgPool: return "GlobalAvgPool";
    case LayerKind::kSoftmaxXent: return "SoftmaxXent";
  }
  return "?";
}

LayerSpec LayerSpec::linear(std::size_t in, std::size_t out) {
  LayerSpec l;
  l.kind = LayerKind::kLinear;
  l.in = in;
  l.out = out;
  return l;
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t k,
                            std::size_t stride, std::size_t pad) {
  LayerSpec l;
  l.kind = LayerKind::kConv2d;
  l.in = in_ch;
  l.out = out_ch;
  l.kernel = k;
  l.stride = stride;
  l.pad = pad;
  return l;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec l;
  l.kind = LayerKind::kDropout;
  l.rate = rate;
  return l;
}

LayerSpec LayerSpec::residual_add(std::size_t skip_source) {
  LayerSpec l;
  l.kind = LayerKind::kResidualAdd;
  l.skip = skip_source;
  return l;
}

LayerSpec LayerSpec::global_avg_pool() {
  LayerSpec l;
  l.kind = LayerKind::kGlobalAvgPool;
  return l;
}

LayerSpec LayerSpec::softmax_xent() {
  LayerSpec l;
  l.kind = LayerKind::kSoftmaxXent;
  return l;
}

void LayerSpec::validate() const {
  switch (kind) {
    case LayerKind::kLinear:
      if (in == 0 || out == 0) fail(Errc::kInvalidArgument, "Linear needs in, out >= 1");
      break;
    case LayerKind::kConv2d:
      if (in == 0 || out == 0) fail(Errc::kInvalidArgument, "Conv2d needs channels >= 1");
      if (kernel < 1) fail(Errc::kInvalidArgument, "Conv2d kernel must be >= 1");
      if (stride < 1) fail(Errc::kInvalidArgument, "Conv2d stride must be >= 1");
      break;
    case LayerKind::kDropout:
      if (!(rate >= 0.0 && rate < 1.0)) {
        fail(Errc::kInvalidArgument, "Dropout rate must be in [0, 1)");
      }
      break;
    default: break;
  }
}

std::vector<Shape> LayerSpec::param_shapes() const {
  switch (kind) {
    case LayerKind::kLinear: return {{in, out}, {out}};
    case LayerKind::kConv2d: return {{out, in, kernel, kernel}, {out}};
    default: return {};
  }
}

std::size_t LayerSpec::param_count() const {
  std::size_t n = 0;
  for (const auto& s : param_shapes()) n += shape_numel(s);
  return n;
}

Shape LayerSpec::output_shape(const Shape& input) const {
  const auto bad = [&](const std::string& why) -> Shape {
    fail(Errc::kShapeMismatch, to_string() + " cannot take input " + shape_str(input) + ": " + why);
  };
  switch (kind) {
    case LayerKind::kLinear: {
      if (input.empty()) return bad("needs a batch axis");
      Shape feat(input.begin() + 1, input.end());
      if (shape_numel(feat) != in) return bad("expects " + std::to_string(in) + " features");
      return {input[0], out};
    }
    case LayerKind::kConv2d: {
      if (input.size() != 4) return bad("expects NCHW");
      if (input[1] != in) return bad("expects " + std::to_string(in) + " channels");
      if (input[2] + 2 * pad < kernel || input[3] + 2 * pad < kernel) {
        return bad("kernel larger than padded input");
      }
      return {input[0], out, (input[2] + 2 * pad - kernel) / stride + 1,
              (input[3] + 2 * pad - kernel) / stride + 1};
    }
    case LayerKind::kGlobalAvgPool:
      if (input.size() < 3) return bad("expects N, C and at least one spatial axis");
      return {input[0], input[1]};
    case LayerKind::kSoftmaxXent:
      if (input.size() != 2) return bad("expects (N, classes) logits");
      return input;
    default: return input;
  }
}

std::string LayerSpec::to_string() const {
  std::ostringstream os;
  os << layer_kind_name(kind);
  switch (kind) {
    case LayerKind::kLinear: os << "(" << in << "," << out << ")"; break;
    case LayerKind::kConv2d:
      os << "(" << in << "," << out << "," << kernel << "," << stride << "," << pad << ")";
      break;
    case LayerKind::kDropout: os << "(" << rate << ")"; break;
    case LayerKind::kResidualAdd: os << " skip=" << skip; break;
    default: break;
  }
  return os.str();
}

namespace {

void expect_params(const LayerSpec& layer, std::span<const Tensor> params, DType dtype) {
  const auto shapes = layer.param_shapes();
  if (params.size() != shapes.size()) {
    fail(Errc::kShapeMismatch, layer.to_string() + " expects " + std::to_string(shapes.size()) +
                                   " parameter tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params[i].shape() != shapes[i] || params[i].dtype() != dtype) {
      fail(Errc::kShapeMismatch, layer.to_string() + " parameter " + std::to_string(i) +
                                     " has shape " + shape_str(params[i].shape()) + ", expected " +
                                     shape_str(shapes[i]));
    }
  }
}

struct ConvGeom {
  std::size_t n, c, h, w, o, k, stride, pad, oh, ow;
  std::size_t patch() const { return c * k * k; }
  std::size_t pixels() const { return oh * ow; }
};

ConvGeom conv_geom(const LayerSpec& l, const Shape& in) {
  const Shape out = l.output_shape(in);
  return {in[0], in[1], in[2], in[3], l.out, l.kernel, l.stride, l.pad, out[2], out[3]};
}

// cols[(c*k + ky)*k + kx][oy*ow + ox] = x[c][oy*s + ky - p][ox*s + kx - p] or 0.
template <typename T>
void im2col(const ConvGeom& g, const T* x, T* cols) {
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = cols + ((c * g.k + ky) * g.k + kx) * g.pixels();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                                ix < static_cast<std::ptrdiff_t>(g.w);
            row[oy * g.ow + ox] = inside ? x[(c * g.h + iy) * g.w + ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeom& g, const T* cols, T* x) {
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = cols + ((c * g.k + ky) * g.k + kx) * g.pixels();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            x[(c * g.h + iy) * g.w + ix] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

template <typename T>
Tensor conv_forward(const LayerSpec& l, std::span<const Tensor> params, const Tensor& input) {
  const ConvGeom g = conv_geom(l, input.shape());
  Tensor out(input.dtype(), {g.n, g.o, g.oh, g.ow});
  auto x = input.values<T>();
  auto w = params[0].values<T>();
  auto b = params[1].values<T>();
  auto y = out.mutable_values<T>();
  std::vector<T> cols(g.patch() * g.pixels());
  const std::size_t patch = g.patch();
  const std::size_t px = g.pixels();
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(g, x.data() + n * g.c * g.h * g.w, cols.data());
    T* yn = y.data() + n * g.o * px;
    for (std::size_t o = 0; o < g.o; ++o) {
      T* row = yn + o * px;
      for (std::size_t q = 0; q < patch; ++q) {
        const T wv = w[o * patch + q];
        const T* crow = cols.data() + q * px;
        for (std::size_t j = 0; j < px; ++j) row[j] += wv * crow[j];
      }
      for (std::size_t j = 0; j < px; ++j) row[j] = row[j] + b[o];
    }
  }
  return out;
}

template <typename T>
LayerGrads conv_backward(const LayerSpec& l, std::span<const Tensor> params, const Tensor& grad_out,
                         const Tensor& input) {
  const ConvGeom g = conv_geom(l, input.shape());
  const Shape expect{g.n, g.o, g.oh, g.ow};
  if (grad_out.shape() != expect) {
    fail(Errc::kShapeMismatch, "Conv2d backward: grad " + shape_str(grad_out.shape()) +
                                   " expected " + shape_str(expect));
  }
  LayerGrads r;
  r.grad_input = Tensor(input.dtype(), input.shape());
  r.param_grads.emplace_back(input.dtype(), params[0].shape());
  r.param_grads.emplace_back(input.dtype(), params[1].shape());
  auto x = input.values<T>();
  auto w = params[0].values<T>();
  auto gy = grad_out.values<T>();
  auto gx = r.grad_input.mutable_values<T>();
  auto gw = r.param_grads[0].mutable_values<T>();
  auto gb = r.param_grads[1].mutable_values<T>();
  const std::size_t patch = g.patch();
  const std::size_t px = g.pixels();
  std::vector<T> cols(patch * px);
  std::vector<T> gcols(patch * px);
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(g, x.data() + n * g.c * g.h * g.w, cols.data());
    const T* gyn = gy.data() + n * g.o * px;
    for (std::size_t o = 0; o < g.o; ++o) {
      const T* grow = gyn + o * px;
      T bsum = T(0);
      for (std::size_t j = 0; j < px; ++j) bsum += grow[j];
      gb[o] += bsum;
      for (std::size_t q = 0; q < patch; ++q) {
        const T* crow = cols.data() + q * px;
        T acc = T(0);
        for (std::size_t j = 0; j < px; ++j) acc += grow[j] * crow[j];
        gw[o * patch + q] += acc;
      }
    }
    std::fill(gcols.begin(), gcols.end(), T(0));
    for (std::size_t q = 0; q < patch; ++q) {
      T* gcrow = gcols.data() + q * px;
      for (std::size_t o = 0; o < g.o; ++o) {
        const T wv = w[o * patch + q];
        const T* grow = gyn + o * px;
        for (std::size_t j = 0; j < px; ++j) gcrow[j] += wv * grow[j];
      }
    }
    col2im_add(g, gcols.data(), gx.data() + n * g.c * g.h * g.w);
  }
  return r;
}

template <typename T>
Tensor linear_forward(const LayerSpec& l, std::span<const Tensor> params, const Tensor& input) {
  const std::size_t n = input.dim(0);
  Tensor x2 = input.reshaped({n, l.in});
  Tensor y = matmul_broadcast(x2, params[0]);
  auto yv = y.mutable_values<T>();
  auto b = params[1].values<T>();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < l.out; ++j) yv[i * l.out + j] = yv[i * l.out + j] + b[j];
  }
  return y;
}

template <typename T>
LayerGrads linear_backward(const LayerSpec& l, std::span<const Tensor> params,
                           const Tensor& grad_out, const Tensor& input) {
  const std::size_t n = input.dim(0);
  if (grad_out.shape() != Shape{n, l.out}) {
    fail(Errc::kShapeMismatch, "Linear backward: grad " + shape_str(grad_out.shape()));
  }
  LayerGrads r;
  r.grad_input = Tensor(input.dtype(), input.shape());
  r.param_grads.emplace_back(input.dtype(), params[0].shape());
  r.param_grads.emplace_back(input.dtype(), params[1].shape());
  auto x = input.values<T>();
  auto w = params[0].values<T>();
  auto g = grad_out.values<T>();
  auto gx = r.grad_input.mutable_values<T>();
  auto gw = r.param_grads[0].mutable_values<T>();
  auto gb = r.param_grads[1].mutable_values<T>();
  // grad_W[p][j] = sum_i x[i][p] * g[i][j]
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < l.in; ++p) {
      const T xv = x[i * l.in + p];
      for (std::size_t j = 0; j < l.out; ++j) gw[p * l.out + j] += xv * g[i * l.out + j];
    }
    for (std::size_t j = 0; j < l.out; ++j) gb[j] += g[i * l.out + j];
  }
  // grad_x[i][p] = sum_j g[i][j] * W[p][j]
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < l.in; ++p) {
      T acc = T(0);
      for (std::size_t j = 0; j < l.out; ++j) acc += g[i * l.out + j] * w[p * l.out + j];
      gx[i * l.in + p] = acc;
    }
  }
  return r;
}

template <typename T>
Tensor pool_forward(const Tensor& input) {
  const std::size_t n = input.dim(0), c = input.dim(1);
  const std::size_t area = input.numel() / (n * c == 0 ? 1 : n * c);
  Tensor out(input.dtype(), {n, c});
  auto x = input.values<T>();
  auto y = out.mutable_values<T>();
  for (std::size_t i = 0; i < n * c; ++i) {
    T acc = T(0);
    for (std::size_t j = 0; j < area; ++j) acc += x[i * area + j];
    y[i] = acc / static_cast<T>(area);
  }
  return out;
}

template <typename T>
Tensor pool_backward(const Tensor& grad_out, const Tensor& input) {
  const std::size_t n = input.dim(0), c = input.dim(1);
  if (grad_out.shape() != Shape{n, c}) {
    fail(Errc::kShapeMismatch, "GlobalAvgPool backward: grad " + shape_str(grad_out.shape()));
  }
  const std::size_t area = input.numel() / (n * c == 0 ? 1 : n * c);
  Tensor gx(input.dtype(), input.shape());
  auto g = grad_out.values<T>();
  auto out = gx.mutable_values<T>();
  for (std::size_t i = 0; i < n * c; ++i) {
    const T v = g[i] / static_cast<T>(area);
    for (std::size_t j = 0; j < area; ++j) out[i * area + j] = v;
  }
  return gx;
}

template <typename T>
Tensor softmax_rows(const Tensor& logits) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor probs(logits.dtype(), logits.shape());
  auto x = logits.values<T>();
  auto p = probs.mutable_values<T>();
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = x.data() + i * k;
    const T m = *std::max_element(row, row + k);
    T s = T(0);
    for (std::size_t j = 0; j < k; ++j) {
      p[i * k + j] = std::exp(row[j] - m);
      s += p[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) p[i * k + j] = p[i * k + j] / s;
  }
  return probs;
}

std::vector<std::int64_t> checked_labels(const Tensor& labels, std::size_t n, std::size_t k) {
  if (labels.rank() != 1 || labels.dim(0) != n) {
    fail(Errc::kShapeMismatch, "labels " + shape_str(labels.shape()) + " do not match batch " +
                                   std::to_string(n));
  }
  std::vector<std::int64_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = labels.at_as_double(i);
    if (v < 0 || v >= static_cast<double>(k)) {
      fail(Errc::kInvalidArgument, "label " + std::to_string(v) + " outside [0, " +
                                       std::to_string(k) + ")");
    }
    out[i] = static_cast<std::int64_t>(v);
  }
  return out;
}

template <typename T>
Tensor xent_loss(const Tensor& logits, const std::vector<std::int64_t>& labels) {
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  auto x = logits.values<T>();
  T total = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = x.data() + i * k;
    const T m = *std::max_element(row, row + k);
    T s = T(0);
    for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - m);
    total += (m + std::log(s)) - row[labels[i]];
  }
  return Tensor::scalar<T>(total / static_cast<T>(n));
}

template <typename T>
Tensor xent_backward(const Tensor& grad_out, const LayerCache& cache) {
  if (grad_out.numel() != 1) {
    fail(Errc::kShapeMismatch, "SoftmaxXent backward needs a scalar grad, got " +
                                   shape_str(grad_out.shape()));
  }
  const Tensor& probs = cache.aux;
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  const auto labels = checked_labels(cache.labels, n, k);
  const T scale = grad_out.values<T>()[0] / static_cast<T>(n);
  Tensor gx(probs.dtype(), probs.shape());
  auto p = probs.values<T>();
  auto g = gx.mutable_values<T>();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const T onehot = static_cast<std::int64_t>(j) == labels[i] ? T(1) : T(0);
      g[i * k + j] = (p[i * k + j] - onehot) * scale;
    }
  }
  return gx;
}

void require_shape(const Tensor& a, const Shape& want, const char* what) {
  if (a.shape() != want) {
    fail(Errc::kShapeMismatch, std::string(what) + ": got " + shape_str(a.shape()) +
                                   ", expected " + shape_str(want));
  }
}

}  // namespace

LayerForward layer_forward(const LayerSpec& layer, std::span<const Tensor> params,
                           const Tensor& input, const LayerContext& ctx) {
  layer.validate();
  expect_params(layer, params, input.dtype());
  (void)layer.output_shape(input.shape());
  LayerForward r;
  r.cache.kind = layer.kind;
  r.cache.valid = true;
  switch (layer.kind) {
    case LayerKind::kLinear:
      r.cache.input = input;
      r.output = dispatch_float(input.dtype(),
                                [&]<typename T>() { return linear_forward<T>(layer, params, input); });
      break;
    case LayerKind::kConv2d:
      r.cache.input = input;
      r.output = dispatch_float(input.dtype(),
                                [&]<typename T>() { return conv_forward<T>(layer, params, input); });
      break;
    case LayerKind::kReLU: {
      r.cache.input = input;
      r.output = Tensor(input.dtype(), input.shape());
      dispatch_float(input.dtype(), [&]<typename T>() {
        auto x = input.values<T>();
        auto y = r.output.mutable_values<T>();
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] < T(0) ? T(0) : x[i];  // NaN propagates
      });
      break;
    }
    case LayerKind::kDropout: {
      Prng prng = Prng::for_stream(ctx.seed, ctx.batch, ctx.microbatch, ctx.layer_index);
      auto d = dropout(input, layer.rate, prng, ctx.training);
      r.output = std::move(d.output);
      r.cache.aux = std::move(d.mask);
      r.cache.input = Tensor(input.dtype(), input.shape());
      break;
    }
    case LayerKind::kResidualAdd: {
      if (ctx.skip == nullptr) {
        fail(Errc::kInvalidArgument,
             "ResidualAdd at layer " + std::to_string(ctx.layer_index) + " is missing its skip source " +
                 std::to_string(layer.skip));
      }
      require_shape(*ctx.skip, input.shape(), "ResidualAdd skip input");
      r.output = input;
      add_inplace(r.output, *ctx.skip);
      r.cache.input = Tensor(input.dtype(), input.shape());
      break;
    }
    case LayerKind::kGlobalAvgPool:
      r.cache.input = input;
      r.output = dispatch_float(input.dtype(), [&]<typename T>() { return pool_forward<T>(input); });
      break;
    case LayerKind::kSoftmaxXent: {
      r.cache.aux = dispatch_float(input.dtype(),
                                   [&]<typename T>() { return softmax_rows<T>(input); });
      if (ctx.labels != nullptr && ctx.training) {
        const auto labels = checked_labels(*ctx.labels, input.dim(0), input.dim(1));
        r.cache.labels = *ctx.labels;
        r.cache.has_labels = true;
        r.output = dispatch_float(input.dtype(),
                                  [&]<typename T>() { return xent_loss<T>(input, labels); });
      } else {
        r.output = r.cache.aux;
      }
      r.cache.input = Tensor(input.dtype(), input.shape());
      break;
    }
  }
  return r;
}

LayerGrads layer_backward(const LayerSpec& layer, std::span<const Tensor> params,
                          const Tensor& grad_out, const LayerCache& cache) {
  if (!cache.valid || cache.kind != layer.kind) {
    fail(Errc::kInvalidArgument,
         std::string("backward cache does not belong to a ") + layer_kind_name(layer.kind) + " forward");
  }
  const Tensor& input = cache.input;
  if (grad_out.dtype() != input.dtype()) {
    fail(Errc::kInvalidArgument, "grad dtype differs from forward dtype");
  }
  LayerGrads r;
  switch (layer.kind) {
    case LayerKind::kLinear:
      expect_params(layer, params, input.dtype());
      return dispatch_float(input.dtype(), [&]<typename T>() {
        return linear_backward<T>(layer, params, grad_out, input);
      });
    case LayerKind::kConv2d:
      expect_params(layer, params, input.dtype());
      return dispatch_float(input.dtype(), [&]<typename T>() {
        return conv_backward<T>(layer, params, grad_out, input);
      });
    case LayerKind::kReLU: {
      require_shape(grad_out, input.shape(), "ReLU backward grad");
      r.grad_input = Tensor(input.dtype(), input.shape());
      dispatch_float(input.dtype(), [&]<typename T>() {
        auto x = input.values<T>();
        auto g = grad_out.values<T>();
        auto out = r.grad_input.mutable_values<T>();
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? g[i] : T(0);
      });
      return r;
    }
    case LayerKind::kDropout:
      require_shape(grad_out, input.shape(), "Dropout backward grad");
      r.grad_input = dropout_with_mask(grad_out, cache.aux, layer.rate);
      return r;
    case LayerKind::kResidualAdd:
      require_shape(grad_out, input.shape(), "ResidualAdd backward grad");
      r.grad_input = grad_out;
      r.grad_skip = grad_out;
      return r;
    case LayerKind::kGlobalAvgPool:
      r.grad_input = dispatch_float(input.dtype(), [&]<typename T>() {
        return pool_backward<T>(grad_out, input);
      });
      return r;
    case LayerKind::kSoftmaxXent:
      if (!cache.has_labels) {
        fail(Errc::kInvalidArgument, "SoftmaxXent backward needs a forward run with labels");
      }
      r.grad_input = dispatch_float(input.dtype(), [&]<typename T>() {
        return xent_backward<T>(grad_out, cache);
      });
      return r;
  }
  return r;
}

std::vector<Tensor> init_params(const LayerSpec& layer, DType dtype, Prng& prng) {
  std::vector<Tensor> params;
  std::size_t fan_in = 1;
  if (layer.kind == LayerKind::kLinear) fan_in = layer.in;
  if (layer.kind == LayerKind::kConv2d) fan_in = layer.in * layer.kernel * layer.kernel;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (const auto& shape : layer.param_shapes()) {
    Tensor t(dtype, shape);
    dispatch_float(dtype, [&]<typename T>() {
      for (auto& v : t.mutable_values<T>()) v = static_cast<T>(prng.next_uniform(-bound, bound));
    });
    params.push_back(std::move(t));
  }
  return params;
}

}  // namespace edgepipe
