// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cmath>
#include <filesystem>
#include <future>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "edgepipe/executor.hpp"
#include "edgepipe/layers.hpp"
#include "edgepipe/prng.hpp"
#include "edgepipe/tensor.hpp"
#include "edgepipe/worker.hpp"

namespace edgepipe::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(EDGEPIPE_FIXTURE_DIR) / name;
}

inline std::filesystem::path vector_file(const std::string& name) {
  return std::filesystem::path(EDGEPIPE_VECTOR_DIR) / name;
}

// A WorkerServer accepting on an ephemeral loopback port from its own thread.
class LoopbackWorker {
 public:
  explicit LoopbackWorker(WorkerOptions options = {}) : server_(std::move(options)) {
    auto bound = std::make_shared<std::promise<std::uint16_t>>();
    auto fut = bound->get_future();
    thread_ = std::thread([this, bound] {
      bool announced = false;
      try {
        server_.serve("127.0.0.1:0", [&](std::uint16_t port) {
          announced = true;
          bound->set_value(port);
        });
      } catch (...) {
        if (!announced) bound->set_exception(std::current_exception());
      }
    });
    try {
      port_ = fut.get();
    } catch (...) {
      thread_.join();
      throw;
    }
  }
  ~LoopbackWorker() {
    server_.stop();
    thread_.join();
  }
  LoopbackWorker(const LoopbackWorker&) = delete;
  LoopbackWorker& operator=(const LoopbackWorker&) = delete;

  std::string address() const { return "127.0.0.1:" + std::to_string(port_); }
  WorkerServer& server() { return server_; }

 private:
  WorkerServer server_;
  std::thread thread_;
  std::uint16_t port_ = 0;
};

// ---- finite differences ------------------------------------------------------

// ||a - n|| / max(||a||, ||n||, 1e-8), both as flat vectors.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
}

inline std::vector<double> as_doubles(const Tensor& t) {
  std::vector<double> v(t.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = t.at_as_double(i);
  return v;
}

inline Tensor random_tensor(DType dtype, Shape shape, Prng& prng, double lo = -1.0, double hi = 1.0,
                            double min_magnitude = 0.0) {
  Tensor t(dtype, std::move(shape));
  dispatch_float(dtype, [&]<typename T>() {
    for (auto& x : t.mutable_values<T>()) {
      double v = prng.next_uniform(lo, hi);
      while (std::abs(v) < min_magnitude) v = prng.next_uniform(lo, hi);
      x = static_cast<T>(v);
    }
  });
  return t;
}

struct GradCase {
  LayerSpec layer;
  std::vector<Tensor> params;
  Tensor input;
  Tensor skip;    // ResidualAdd
  Tensor labels;  // SoftmaxXent
  Tensor probe;   // loss = sum(probe * output); unused for SoftmaxXent
};

struct GradCheckResult {
  std::string what;
  double rel_err = 0.0;
};

// Draws a random instance of `kind` with small shapes. ReLU inputs keep a
// margin from the kink so a central difference never straddles it.
inline GradCase random_grad_case(LayerKind kind, DType dtype, Prng& prng) {
  const auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(prng.next_unit() * static_cast<double>(hi - lo + 1));
  };
  GradCase c;
  const std::size_t n = pick(1, 3);
  Shape in_shape;
  switch (kind) {
    case LayerKind::kLinear:
      c.layer = LayerSpec::linear(pick(1, 6), pick(1, 5));
      in_shape = {n, c.layer.in};
      break;
    case LayerKind::kConv2d: {
      const std::size_t k = pick(1, 3);
      c.layer = LayerSpec::conv2d(pick(1, 3), pick(1, 3), k, pick(1, 2), pick(0, 1));
      const std::size_t h = pick(k, 6), w = pick(k, 6);
      in_shape = {n, c.layer.in, h, w};
      break;
    }
    case LayerKind::kReLU:
      c.layer = LayerSpec::relu();
      in_shape = {n, pick(1, 8)};
      break;
    case LayerKind::kDropout:
      c.layer = LayerSpec::dropout(0.1 + 0.6 * prng.next_unit());
      in_shape = {n, pick(2, 12)};
      break;
    case LayerKind::kResidualAdd:
      c.layer = LayerSpec::residual_add(0);
      in_shape = {n, pick(1, 3), pick(1, 4), pick(1, 4)};
      break;
    case LayerKind::kGlobalAvgPool:
      c.layer = LayerSpec::global_avg_pool();
      in_shape = {n, pick(1, 4), pick(1, 4), pick(1, 4)};
      break;
    case LayerKind::kSoftmaxXent: {
      c.layer = LayerSpec::softmax_xent();
      const std::size_t classes = pick(2, 7);
      in_shape = {n, classes};
      std::vector<std::int64_t> ids(n);
      for (auto& id : ids) id = static_cast<std::int64_t>(pick(0, classes - 1));
      c.labels = Tensor::from<std::int64_t>({n}, ids);
      break;
    }
  }
  c.params = init_params(c.layer, dtype, prng);
  const double margin = kind == LayerKind::kReLU ? 0.1 : 0.0;
  c.input = random_tensor(dtype, in_shape, prng, -1.0, 1.0, margin);
  if (kind == LayerKind::kResidualAdd) c.skip = random_tensor(dtype, in_shape, prng);
  if (kind != LayerKind::kSoftmaxXent) {
    c.probe = random_tensor(dtype, c.layer.output_shape(in_shape), prng);
  }
  return c;
}

inline double probe_loss(const GradCase& c, const std::vector<Tensor>& params, const Tensor& input,
                         const Tensor& skip) {
  LayerContext ctx;
  ctx.seed = 7;
  ctx.layer_index = 1;
  ctx.training = true;
  if (c.layer.kind == LayerKind::kSoftmaxXent) ctx.labels = &c.labels;
  if (c.layer.kind == LayerKind::kResidualAdd) ctx.skip = &skip;
  const LayerForward f = layer_forward(c.layer, params, input, ctx);
  if (c.layer.kind == LayerKind::kSoftmaxXent) return f.output.at_as_double(0);
  double s = 0.0;
  for (std::size_t i = 0; i < f.output.numel(); ++i) s += c.probe.at_as_double(i) * f.output.at_as_double(i);
  return s;
}

// Central difference of probe_loss w.r.t. every element of `target`, where
// `target` aliases the input, the skip tensor or one parameter of `c`.
inline std::vector<double> numeric_grad(GradCase& c, Tensor& target, double eps) {
  std::vector<double> g(target.numel());
  dispatch_float(target.dtype(), [&]<typename T>() {
    auto v = target.mutable_values<T>();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const T orig = v[i];
      v[i] = static_cast<T>(orig + eps);
      const T up = v[i];
      const double lp = probe_loss(c, c.params, c.input, c.skip);
      v[i] = static_cast<T>(orig - eps);
      const T down = v[i];
      const double lm = probe_loss(c, c.params, c.input, c.skip);
      v[i] = orig;
      // Divide by the step actually taken after rounding to T.
      g[i] = (lp - lm) / (static_cast<double>(up) - static_cast<double>(down));
    }
  });
  return g;
}

// Analytic gradients from layer_backward against central differences for the
// input, the skip input and every parameter.
inline std::vector<GradCheckResult> check_gradients(GradCase c) {
  const double eps = c.input.dtype() == DType::kF32 ? 5e-3 : 1e-6;
  LayerContext ctx;
  ctx.seed = 7;
  ctx.layer_index = 1;
  ctx.training = true;
  if (c.layer.kind == LayerKind::kSoftmaxXent) ctx.labels = &c.labels;
  if (c.layer.kind == LayerKind::kResidualAdd) ctx.skip = &c.skip;
  const LayerForward f = layer_forward(c.layer, c.params, c.input, ctx);
  const Tensor seed = c.layer.kind == LayerKind::kSoftmaxXent ? unit_seed_grad(c.input.dtype()) : c.probe;
  const LayerGrads g = layer_backward(c.layer, c.params, seed, f.cache);

  std::vector<GradCheckResult> out;
  out.push_back({"input", relative_error(as_doubles(g.grad_input), numeric_grad(c, c.input, eps))});
  if (c.layer.kind == LayerKind::kResidualAdd) {
    out.push_back({"skip", relative_error(as_doubles(g.grad_skip), numeric_grad(c, c.skip, eps))});
  }
  for (std::size_t p = 0; p < c.params.size(); ++p) {
    out.push_back({"param" + std::to_string(p),
                   relative_error(as_doubles(g.param_grads.at(p)), numeric_grad(c, c.params[p], eps))});
  }
  return out;
}

inline constexpr LayerKind kAllLayerKinds[] = {
    LayerKind::kLinear,        LayerKind::kConv2d,        LayerKind::kReLU,
    LayerKind::kDropout,       LayerKind::kResidualAdd,   LayerKind::kGlobalAvgPool,
    LayerKind::kSoftmaxXent,
};

}  // namespace edgepipe::testing
