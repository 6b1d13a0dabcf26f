// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/planner.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "edgepipe/executor.hpp"
#include "edgepipe/wire.hpp"

namespace edgepipe {

void LinkModel::validate() const {
  if (!(bandwidth > 0.0)) fail(Errc::kInvalidArgument, "link bandwidth must be > 0");
  if (!(latency >= 0.0) || !std::isfinite(latency)) {
    fail(Errc::kInvalidArgument, "link latency must be finite and >= 0");
  }
}

double LinkModel::transfer_seconds(std::size_t bytes) const {
  if (std::isinf(bandwidth)) return 0.0;
  return static_cast<double>(bytes) / bandwidth;
}

void CostModel::validate(std::size_t layer_count) const {
  if (forward.size() != layer_count || backward.size() != layer_count) {
    fail(Errc::kInvalidArgument, fmt::format("cost model covers {}/{} layers, graph has {}",
                                             forward.size(), backward.size(), layer_count));
  }
  for (std::size_t i = 0; i < layer_count; ++i) {
    if (!(forward[i] >= 0.0) || !(backward[i] >= 0.0) || !std::isfinite(forward[i]) ||
        !std::isfinite(backward[i])) {
      fail(Errc::kInvalidArgument, fmt::format("layer {} has a negative or non-finite cost", i));
    }
  }
}

double CostModel::forward_seconds(std::size_t begin, std::size_t end) const {
  double t = 0.0;
  for (std::size_t i = begin; i < end; ++i) t += forward.at(i);
  return t;
}

double CostModel::backward_seconds(std::size_t begin, std::size_t end) const {
  double t = 0.0;
  for (std::size_t i = begin; i < end; ++i) t += backward.at(i);
  return t;
}

double CostModel::stage_seconds(std::size_t begin, std::size_t end) const {
  return forward_seconds(begin, end) + backward_seconds(begin, end);
}

CostModel CostModel::uniform(std::size_t layers, double fwd, double bwd) {
  CostModel c;
  c.forward.assign(layers, fwd);
  c.backward.assign(layers, bwd);
  return c;
}

CostModel parse_cost_file(std::string_view text, std::size_t layer_count) {
  CostModel c = CostModel::uniform(layer_count, 0.0, 0.0);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string target;
    if (!(ls >> target)) continue;
    std::optional<double> fwd, bwd;
    std::string kv;
    while (ls >> kv) {
      const auto eq = kv.find('=');
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(kv.substr(eq + 1), &used);
        if (eq == std::string::npos || used != kv.size() - eq - 1) throw std::invalid_argument(kv);
      } catch (const std::exception&) {
        fail(Errc::kParse, fmt::format("line {}: malformed entry '{}'", line_no, kv));
      }
      const std::string key = kv.substr(0, eq);
      if (key == "fwd") {
        fwd = v;
      } else if (key == "bwd") {
        bwd = v;
      } else {
        fail(Errc::kParse, fmt::format("line {}: unknown key '{}'", line_no, key));
      }
    }
    const auto apply = [&](std::size_t i) {
      if (fwd) c.forward[i] = *fwd;
      if (bwd) c.backward[i] = *bwd;
    };
    if (target == "default") {
      for (std::size_t i = 0; i < layer_count; ++i) apply(i);
    } else {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(target, &used);
        if (used != target.size()) throw std::invalid_argument(target);
      } catch (const std::exception&) {
        fail(Errc::kParse, fmt::format("line {}: expected 'default' or a layer index, got '{}'",
                                       line_no, target));
      }
      if (idx >= layer_count) {
        fail(Errc::kParse, fmt::format("line {}: layer {} outside a {}-layer model", line_no, idx,
                                       layer_count));
      }
      apply(idx);
    }
  }
  c.validate(layer_count);
  return c;
}

CostModel load_cost_file(const std::filesystem::path& path, std::size_t layer_count) {
  try {
    return parse_cost_file(read_text_file(path), layer_count);
  } catch (const Error& e) {
    if (e.code() == Errc::kIo) throw;
    fail(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

CostModel measured_costs(const ModelGraph& graph, const ModelWeights& weights, std::uint64_t seed) {
  const MeasuredCosts m = measure_layer_costs(graph, weights, seed, 3);
  CostModel c;
  c.forward = m.forward;
  c.backward = m.backward;
  c.source = CostSource::kMeasured;
  return c;
}

PartitionSpec PartitionSpec::at(const ModelGraph& graph, std::size_t cut) {
  if (!graph.is_legal_cut(cut)) {
    fail(Errc::kInvalidArgument,
         fmt::format("cut {} is not legal for a {}-layer graph (range or skip edge)", cut,
                     graph.size()));
  }
  PartitionSpec s;
  s.cut_index = cut;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    (i < cut ? s.stage0_layers : s.stage1_layers).push_back(i);
  }
  s.cut_activation = graph.cut_activation(cut);
  return s;
}

std::size_t cut_bytes(const ModelGraph& graph, std::size_t cut, DType dtype) {
  return shape_numel(graph.cut_activation(cut)) * dtype_width(dtype);
}

double predict_makespan(const ModelGraph& graph, const PartitionSpec& spec, const CostModel& costs,
                        const LinkModel& link, std::size_t microbatches) {
  if (microbatches == 0) fail(Errc::kInvalidArgument, "microbatch count must be >= 1");
  costs.validate(graph.size());
  const double m = static_cast<double>(microbatches);
  const double t0 = costs.stage_seconds(0, spec.cut_index);
  const double t1 = costs.stage_seconds(spec.cut_index, graph.size());
  const std::size_t bytes = cut_bytes(graph, spec.cut_index);
  return (m + 1.0) * std::max(t0, t1) + m * link.transfer_seconds(2 * bytes) +
         2.0 * m * link.latency;
}

std::vector<CutEvaluation> evaluate_cuts(const ModelGraph& graph, const CostModel& costs,
                                         const LinkModel& link, std::size_t microbatches) {
  link.validate();
  std::vector<CutEvaluation> out;
  for (std::size_t cut : graph.legal_cuts()) {
    const PartitionSpec spec = PartitionSpec::at(graph, cut);
    out.push_back({cut, predict_makespan(graph, spec, costs, link, microbatches),
                   cut_bytes(graph, cut)});
  }
  return out;
}

PartitionSpec plan_split(const ModelGraph& graph, const CostModel& costs, const LinkModel& link,
                         std::size_t microbatches) {
  const auto evals = evaluate_cuts(graph, costs, link, microbatches);
  if (evals.empty()) {
    fail(Errc::kNoLegalCut,
         fmt::format("no legal cut in '{}': every cut crosses a skip edge", graph.name));
  }
  const CutEvaluation* best = &evals.front();
  for (const auto& e : evals) {
    if (e.makespan < best->makespan ||
        (e.makespan == best->makespan && e.activation_bytes < best->activation_bytes)) {
      best = &e;
    }
  }
  return PartitionSpec::at(graph, best->cut);
}

// ---- partition payload ------------------------------------------------------

namespace {

constexpr std::uint8_t kMagic[4] = {'E', 'P', 'P', 'T'};
constexpr std::uint16_t kPartitionVersion = 1;

}  // namespace

std::size_t Partition::weight_bytes() const {
  std::size_t n = 0;
  for (const auto& layer : weights) {
    for (const auto& t : layer) n += t.byte_size();
  }
  return n;
}

bool Partition::operator==(const Partition& o) const {
  if (model_name != o.model_name || total_layers != o.total_layers ||
      first_layer != o.first_layer || input_shape != o.input_shape || layers != o.layers ||
      weights.size() != o.weights.size()) {
    return false;
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].size() != o.weights[l].size()) return false;
    for (std::size_t p = 0; p < weights[l].size(); ++p) {
      if (!weights[l][p].bit_equal(o.weights[l][p])) return false;
    }
  }
  return true;
}

Bytes serialize_partition(const ModelGraph& graph, const ModelWeights& weights,
                          const PartitionSpec& spec) {
  if (spec.stage1_layers.empty() || spec.cut_index == 0 || spec.cut_index >= graph.size()) {
    fail(Errc::kInvalidArgument, "partition has an empty stage");
  }
  ByteWriter w;
  w.raw(kMagic);
  w.u16(kPartitionVersion);
  w.short_str(graph.name);
  w.u32(static_cast<std::uint32_t>(graph.size()));
  w.u32(static_cast<std::uint32_t>(spec.cut_index));
  const Shape& in = graph.cut_activation(spec.cut_index);
  w.u8(static_cast<std::uint8_t>(in.size()));
  for (auto d : in) w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(graph.size() - spec.cut_index));
  for (std::size_t i = spec.cut_index; i < graph.size(); ++i) {
    const LayerSpec& l = graph.layers[i];
    const auto shapes = l.param_shapes();
    if (i >= weights.size() || weights[i].size() != shapes.size()) {
      fail(Errc::kMissingWeight, fmt::format("layer {} ({}) has no weights", i, l.to_string()));
    }
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u32(static_cast<std::uint32_t>(l.in));
    w.u32(static_cast<std::uint32_t>(l.out));
    w.u32(static_cast<std::uint32_t>(l.kernel));
    w.u32(static_cast<std::uint32_t>(l.stride));
    w.u32(static_cast<std::uint32_t>(l.pad));
    w.f64(l.rate);
    w.u32(static_cast<std::uint32_t>(l.skip));
    w.u8(static_cast<std::uint8_t>(shapes.size()));
    for (std::size_t p = 0; p < shapes.size(); ++p) {
      if (weights[i][p].shape() != shapes[p]) {
        fail(Errc::kMissingWeight, fmt::format("layer {} parameter {} has shape {}, expected {}",
                                               i, p, shape_str(weights[i][p].shape()),
                                               shape_str(shapes[p])));
      }
      wire::encode_tensor(w, weights[i][p]);
    }
  }
  return w.take();
}

Partition deserialize_partition(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  try {
    const auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) {
      fail(Errc::kProtocol, "partition payload has a bad magic");
    }
    const auto version = r.u16();
    if (version != kPartitionVersion) {
      fail(Errc::kVersionMismatch, fmt::format("partition format version {}", version));
    }
    Partition p;
    p.model_name = r.short_str();
    p.total_layers = r.u32();
    p.first_layer = r.u32();
    p.input_shape.resize(r.u8());
    for (auto& d : p.input_shape) d = r.u32();
    const auto count = r.u32();
    if (count == 0 || p.first_layer + count != p.total_layers) {
      fail(Errc::kProtocol, "partition layer range is inconsistent");
    }
    for (std::uint32_t i = 0; i < count; ++i) {
      LayerSpec l;
      const auto kind = r.u8();
      if (kind < 1 || kind > 7) fail(Errc::kProtocol, fmt::format("unknown layer kind {}", kind));
      l.kind = static_cast<LayerKind>(kind);
      l.in = r.u32();
      l.out = r.u32();
      l.kernel = r.u32();
      l.stride = r.u32();
      l.pad = r.u32();
      l.rate = r.f64();
      l.skip = r.u32();
      l.validate();
      const auto nparams = r.u8();
      const auto shapes = l.param_shapes();
      if (nparams != shapes.size()) {
        fail(Errc::kProtocol, fmt::format("{} carries {} parameters", l.to_string(), nparams));
      }
      std::vector<Tensor> params;
      for (std::size_t k = 0; k < nparams; ++k) {
        params.push_back(wire::decode_tensor(r));
        if (params.back().shape() != shapes[k]) {
          fail(Errc::kProtocol, fmt::format("{} parameter {} has shape {}", l.to_string(), k,
                                            shape_str(params.back().shape())));
        }
      }
      p.layers.push_back(l);
      p.weights.push_back(std::move(params));
    }
    r.expect_end("partition");
    return p;
  } catch (const Error& e) {
    if (e.code() == Errc::kTruncatedPayload) fail(Errc::kProtocol, fmt::format("partition truncated: {}", e.what()));
    throw;
  }
}

}  // namespace edgepipe
