// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "edgepipe/analysis.hpp"
#include "edgepipe/executor.hpp"
#include "edgepipe/model_graph.hpp"
#include "edgepipe/planner.hpp"
#include "edgepipe/trace.hpp"

namespace edgepipe {

class WorkerClient;

struct PipelineConfig {
  std::size_t microbatches = 8;
  std::size_t microbatch_size = 8;
  std::size_t batches = 1;
  double lr = 0.01;
  std::uint64_t seed = 1;
  std::size_t cut = 1;  // first stage-1 layer
  // When set, layer compute is replaced by sleeps of these durations.
  std::optional<CostModel> synthetic_costs;
  // Cross-device ordering checks read timestamps from both ends, which is
  // only meaningful when host and worker share a monotonic clock.
  bool check_schedule = true;

  std::size_t batch_size() const noexcept { return microbatches * microbatch_size; }
  void validate(const ModelGraph& graph) const;
};

struct BatchReport {
  std::uint32_t batch = 0;
  double wall_ms = 0.0;
  double loss = 0.0;  // mean over microbatches; 0 in synthetic mode
  double stage0_busy_ms = 0.0;
  double stage0_idle_ms = 0.0;
  double stage1_busy_ms = 0.0;
  double stage1_idle_ms = 0.0;
  std::vector<std::string> schedule_violations;
};

// Stage 0 on this process, stage 1 on a worker. Stage-0 forwards run ahead;
// a sender thread streams FWDBWD_REQ frames while stage 0 keeps computing;
// backwards run in microbatch order as gradients return.
class PipelineHost {
 public:
  PipelineHost(const ModelGraph& graph, ModelWeights weights, PipelineConfig config,
               WorkerClient& worker, TraceRecorder* trace = nullptr);
  ~PipelineHost();
  PipelineHost(const PipelineHost&) = delete;
  PipelineHost& operator=(const PipelineHost&) = delete;

  // Ships the stage-1 partition with its current weights.
  void load();

  // `inputs` holds M * microbatch_size rows, `labels` the matching I64 ids.
  BatchReport train_batch(std::uint32_t batch, const Tensor& inputs, const Tensor& labels);
  Tensor infer_batch(std::uint32_t batch, const Tensor& inputs);
  const BatchReport& last_report() const noexcept { return last_; }

  const ModelWeights& stage0_weights() const noexcept { return stage0_.params; }
  // Stage-0 weights plus the worker's stage-1 weights, one entry per layer.
  ModelWeights full_weights();

  const ModelGraph& graph() const noexcept { return graph_; }
  const PipelineConfig& config() const noexcept { return config_; }

 private:
  struct Sender;

  void check_rows(const Tensor& inputs, const char* what) const;
  Tensor stage0_forward(std::uint32_t batch, std::size_t mb, const Tensor& x, bool training,
                        StageTape* tape);

  ModelGraph graph_;  // batch dimension = microbatch_size
  ModelWeights init_weights_;
  PipelineConfig config_;
  WorkerClient& worker_;
  TraceRecorder* trace_;
  Stage stage0_;
  std::unique_ptr<Sender> sender_;
  BatchReport last_;
};

// Single-process reference: the whole model on one device, same microbatch
// order, same seeds, same accumulation order.
class SerialTrainer {
 public:
  SerialTrainer(const ModelGraph& graph, ModelWeights weights, PipelineConfig config,
                TraceRecorder* trace = nullptr);

  BatchReport train_batch(std::uint32_t batch, const Tensor& inputs, const Tensor& labels);
  Tensor infer_batch(std::uint32_t batch, const Tensor& inputs);
  const ModelWeights& weights() const noexcept { return whole_.params; }

 private:
  ModelGraph graph_;
  PipelineConfig config_;
  TraceRecorder* trace_;
  Stage whole_;
};

enum class RunMode { kBaseline, kPipelined };

// Trains config.batches synthetic batches. kPipelined needs `worker`; the
// partition is loaded first. `baseline`, when given, fills percent_decrease.
struct ExperimentResult {
  RunSummary summary;
  std::vector<BatchReport> batches;
  ModelWeights final_weights;
};
ExperimentResult run_experiment(const ModelGraph& graph, const ModelWeights& weights,
                                const PipelineConfig& config, RunMode mode,
                                WorkerClient* worker = nullptr, TraceRecorder* trace = nullptr,
                                const RunSummary* baseline = nullptr);

// "<model> N=<batches> M=<microbatches> mb=<size>"
std::string experiment_key(const ModelGraph& graph, const PipelineConfig& config);

}  // namespace edgepipe
