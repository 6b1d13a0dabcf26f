// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/executor.hpp"

#include <algorithm>
#include <chrono>
#include <optional>

#include <fmt/format.h>

#include "edgepipe/ops.hpp"
#include "edgepipe/prng.hpp"

namespace edgepipe {

Shape Stage::output_shape() const {
  Shape s = input_shape;
  for (const auto& l : layers) s = l.output_shape(s);
  return s;
}

std::size_t Stage::param_tensor_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.size();
  return n;
}

Stage Stage::slice(const ModelGraph& graph, const ModelWeights& weights, std::size_t begin,
                   std::size_t end) {
  if (begin >= end || end > graph.size()) {
    fail(Errc::kInvalidArgument,
         fmt::format("stage [{}, {}) outside a graph of {} layers", begin, end, graph.size()));
  }
  if (weights.size() != graph.size()) {
    fail(Errc::kMissingWeight, fmt::format("weights cover {} layers, graph has {}",
                                           weights.size(), graph.size()));
  }
  Stage s;
  s.first_layer = begin;
  s.input_shape = graph.input_of(begin);
  s.layers.assign(graph.layers.begin() + static_cast<std::ptrdiff_t>(begin),
                  graph.layers.begin() + static_cast<std::ptrdiff_t>(end));
  s.params.assign(weights.begin() + static_cast<std::ptrdiff_t>(begin),
                  weights.begin() + static_cast<std::ptrdiff_t>(end));
  return s;
}

namespace {

// Local activation slot of a global layer output: slot 0 is the stage input
// (output of first_layer - 1), slot k+1 is the output of local layer k.
std::size_t slot_of(const Stage& stage, std::size_t global_source, std::size_t at_layer) {
  if (global_source + 1 < stage.first_layer || global_source >= at_layer) {
    fail(Errc::kInvalidArgument,
         fmt::format("layer {} is missing its skip source {} in stage starting at {}", at_layer,
                     global_source, stage.first_layer));
  }
  return global_source + 1 - stage.first_layer;
}

}  // namespace

StageTape stage_forward(const Stage& stage, const Tensor& input, const StepKey& key,
                        const Tensor* labels) {
  if (stage.params.size() != stage.layers.size()) {
    fail(Errc::kMissingWeight, "stage parameter list does not match its layers");
  }
  StageTape tape;
  tape.input = input;
  tape.caches.reserve(stage.layers.size());
  tape.outputs.reserve(stage.layers.size());
  const Tensor* cur = &tape.input;
  for (std::size_t i = 0; i < stage.layers.size(); ++i) {
    const LayerSpec& l = stage.layers[i];
    const std::size_t global = stage.first_layer + i;
    LayerContext ctx;
    ctx.seed = key.seed;
    ctx.batch = key.batch;
    ctx.microbatch = key.microbatch;
    ctx.layer_index = global;
    ctx.training = key.training;
    if (l.kind == LayerKind::kSoftmaxXent) ctx.labels = labels;
    if (l.kind == LayerKind::kResidualAdd) {
      const std::size_t slot = slot_of(stage, l.skip, global);
      ctx.skip = slot == 0 ? &tape.input : &tape.outputs[slot - 1];
    }
    LayerForward f;
    try {
      f = layer_forward(l, stage.params[i], *cur, ctx);
    } catch (const Error& e) {
      fail(e.code(), fmt::format("layer {} ({}): {}", global, l.to_string(), e.what()));
    }
    tape.caches.push_back(std::move(f.cache));
    tape.outputs.push_back(std::move(f.output));
    cur = &tape.outputs.back();
  }
  tape.output = *cur;
  return tape;
}

StageGrads stage_backward(const Stage& stage, const StageTape& tape, const Tensor& grad_output) {
  const std::size_t n = stage.layers.size();
  if (tape.caches.size() != n) fail(Errc::kInvalidArgument, "tape does not belong to this stage");
  // grads[k] is the gradient of activation slot k. Contributions are added in
  // descending layer order, so the order matches a whole-model pass exactly.
  std::vector<std::optional<Tensor>> grads(n + 1);
  grads[n] = grad_output;
  const auto accumulate = [&](std::size_t slot, Tensor&& g) {
    if (!grads[slot]) {
      grads[slot] = std::move(g);
    } else {
      add_inplace(*grads[slot], g);
    }
  };
  StageGrads out;
  out.param_grads.resize(n);
  for (std::size_t i = n; i-- > 0;) {
    const LayerSpec& l = stage.layers[i];
    const std::size_t global = stage.first_layer + i;
    if (!grads[i + 1]) {
      fail(Errc::kInvalidArgument, fmt::format("layer {} output has no gradient", global));
    }
    LayerGrads g;
    try {
      g = layer_backward(l, stage.params[i], *grads[i + 1], tape.caches[i]);
    } catch (const Error& e) {
      fail(e.code(), fmt::format("layer {} ({}) backward: {}", global, l.to_string(), e.what()));
    }
    grads[i + 1].reset();
    accumulate(i, std::move(g.grad_input));
    if (l.kind == LayerKind::kResidualAdd) {
      accumulate(slot_of(stage, l.skip, global), std::move(g.grad_skip));
    }
    out.param_grads[i] = std::move(g.param_grads);
  }
  out.grad_input = std::move(*grads[0]);
  return out;
}

Tensor unit_seed_grad(DType dtype) {
  return dispatch_float(dtype, [&]<typename T>() { return Tensor::scalar<T>(T(1)); });
}

void GradAccumulator::add(const ModelWeights& grads) {
  if (count_ == 0) {
    sum_ = grads;
  } else {
    if (grads.size() != sum_.size()) fail(Errc::kShapeMismatch, "gradient layout changed");
    for (std::size_t l = 0; l < grads.size(); ++l) {
      if (grads[l].size() != sum_[l].size()) fail(Errc::kShapeMismatch, "gradient layout changed");
      for (std::size_t p = 0; p < grads[l].size(); ++p) add_inplace(sum_[l][p], grads[l][p]);
    }
  }
  ++count_;
}

ModelWeights GradAccumulator::mean() const {
  if (count_ == 0) fail(Errc::kNoGrads, "no accumulated gradients");
  ModelWeights m(sum_.size());
  for (std::size_t l = 0; l < sum_.size(); ++l) {
    for (const auto& g : sum_[l]) m[l].push_back(divide_by(g, static_cast<double>(count_)));
  }
  return m;
}

void GradAccumulator::clear() noexcept {
  sum_.clear();
  count_ = 0;
}

void apply_sgd(ModelWeights& params, const ModelWeights& grads, double lr) {
  if (params.size() != grads.size()) fail(Errc::kShapeMismatch, "gradient layout mismatch");
  for (std::size_t l = 0; l < params.size(); ++l) sgd_step(params[l], grads[l], lr);
}

MeasuredCosts measure_layer_costs(const ModelGraph& graph, const ModelWeights& weights,
                                  std::uint64_t seed, int repeats) {
  using Clock = std::chrono::steady_clock;
  const Stage whole = Stage::slice(graph, weights, 0, graph.size());
  const Batch data = synthetic_batch(graph, seed, 0, 1, weights.empty() || weights[0].empty()
                                                            ? DType::kF32
                                                            : weights[0][0].dtype());
  const StepKey key{seed, 0, 0, true};
  const StageTape tape = stage_forward(whole, data.inputs, key, &data.labels);

  MeasuredCosts costs;
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const LayerSpec& l = graph.layers[i];
    const Tensor& in = i == 0 ? tape.input : tape.outputs[i - 1];
    LayerContext ctx;
    ctx.seed = seed;
    ctx.layer_index = i;
    ctx.labels = &data.labels;
    if (l.kind == LayerKind::kResidualAdd) ctx.skip = &tape.outputs[l.skip];
    std::vector<double> fwd, bwd;
    for (int r = 0; r < repeats; ++r) {
      auto t0 = Clock::now();
      LayerForward f = layer_forward(l, weights[i], in, ctx);
      auto t1 = Clock::now();
      Tensor g(f.output.dtype(), f.output.shape());
      dispatch_float(g.dtype(), [&]<typename T>() {
        for (auto& v : g.mutable_values<T>()) v = T(1);
      });
      auto t2 = Clock::now();
      (void)layer_backward(l, weights[i], g, f.cache);
      auto t3 = Clock::now();
      fwd.push_back(std::chrono::duration<double>(t1 - t0).count());
      bwd.push_back(std::chrono::duration<double>(t3 - t2).count());
    }
    costs.forward.push_back(median(fwd));
    costs.backward.push_back(median(bwd));
  }
  return costs;
}

std::size_t class_count(const ModelGraph& graph) {
  if (graph.ends_with_loss()) return graph.input_of(graph.size() - 1).at(1);
  const Shape& out = graph.output_shapes.back();
  return out.size() >= 2 ? out[1] : 1;
}

Batch synthetic_batch(const ModelGraph& graph, std::uint64_t seed, std::uint64_t batch,
                      std::size_t microbatches, DType dtype) {
  if (microbatches == 0) fail(Errc::kInvalidArgument, "batch needs at least one microbatch");
  Shape shape = graph.input_shape;
  const std::size_t rows = shape.at(0) * microbatches;
  shape[0] = rows;
  Prng p = Prng::for_stream(seed, batch, 0, Prng::kDataStream);
  Batch b;
  b.inputs = Tensor(dtype, shape);
  dispatch_float(dtype, [&]<typename T>() {
    for (auto& v : b.inputs.mutable_values<T>()) v = static_cast<T>(p.next_uniform(-1.0, 1.0));
  });
  const std::size_t k = class_count(graph);
  b.labels = Tensor(DType::kI64, {rows});
  for (auto& l : b.labels.mutable_values<std::int64_t>()) {
    l = static_cast<std::int64_t>(p.next_u64() % k);
  }
  return b;
}

}  // namespace edgepipe
