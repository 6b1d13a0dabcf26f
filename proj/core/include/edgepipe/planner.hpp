// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgepipe/bytes.hpp"
#include "edgepipe/model_graph.hpp"

namespace edgepipe {

struct LinkModel {
  double bandwidth = std::numeric_limits<double>::infinity();  // bytes per second
  double latency = 0.0;                                         // seconds per message

  void validate() const;
  double transfer_seconds(std::size_t bytes) const;
};

enum class CostSource : std::uint8_t { kSynthetic, kMeasured };

// Seconds per microbatch, per layer.
struct CostModel {
  std::vector<double> forward;
  std::vector<double> backward;
  CostSource source = CostSource::kSynthetic;

  void validate(std::size_t layer_count) const;
  double stage_seconds(std::size_t begin, std::size_t end) const;
  double forward_seconds(std::size_t begin, std::size_t end) const;
  double backward_seconds(std::size_t begin, std::size_t end) const;

  static CostModel uniform(std::size_t layers, double fwd, double bwd);
};

// Cost file: `default fwd=<s> bwd=<s>` and `<index> fwd=<s> bwd=<s>` lines,
// later lines override earlier ones; `#` comments.
CostModel parse_cost_file(std::string_view text, std::size_t layer_count);
CostModel load_cost_file(const std::filesystem::path& path, std::size_t layer_count);
CostModel measured_costs(const ModelGraph& graph, const ModelWeights& weights, std::uint64_t seed);

struct PartitionSpec {
  std::size_t cut_index = 0;
  std::vector<std::size_t> stage0_layers;
  std::vector<std::size_t> stage1_layers;
  Shape cut_activation;

  // Throws kInvalidArgument for an illegal cut.
  static PartitionSpec at(const ModelGraph& graph, std::size_t cut);
};

// Bytes of the activation (and of its gradient) crossing `cut`, F32 on the wire.
std::size_t cut_bytes(const ModelGraph& graph, std::size_t cut, DType dtype = DType::kF32);

// (M+1)·max(t0, t1) + M·(activation + gradient bytes)/bandwidth + 2M·latency
double predict_makespan(const ModelGraph& graph, const PartitionSpec& spec, const CostModel& costs,
                        const LinkModel& link, std::size_t microbatches);

struct CutEvaluation {
  std::size_t cut = 0;
  double makespan = 0.0;
  std::size_t activation_bytes = 0;
};

// Every legal cut, ascending by index.
std::vector<CutEvaluation> evaluate_cuts(const ModelGraph& graph, const CostModel& costs,
                                         const LinkModel& link, std::size_t microbatches);

// Minimum predicted makespan; ties go to the smaller activation, then the
// lower index. Throws kNoLegalCut when nothing qualifies.
PartitionSpec plan_split(const ModelGraph& graph, const CostModel& costs, const LinkModel& link,
                         std::size_t microbatches);

// ---- partition payload --------------------------------------------------

// A deserialized stage-1 partition.
struct Partition {
  std::string model_name;
  std::size_t total_layers = 0;
  std::size_t first_layer = 0;
  Shape input_shape;
  std::vector<LayerSpec> layers;
  ModelWeights weights;

  std::size_t weight_bytes() const;
  bool operator==(const Partition& other) const;
};

// magic "EPPT" | version u16 | name | total layers u32 | first layer u32 |
// input ndims u8 + dims u32 | layer count u32 | per layer: kind u8, in u32,
// out u32, kernel u32, stride u32, pad u32, rate f64, skip u32, param count u8,
// params as tensor encodings.
Bytes serialize_partition(const ModelGraph& graph, const ModelWeights& weights,
                          const PartitionSpec& spec);
Partition deserialize_partition(std::span<const std::uint8_t> bytes);

}  // namespace edgepipe
