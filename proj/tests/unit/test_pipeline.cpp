// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "edgepipe/analysis.hpp"
#include "edgepipe/executor.hpp"
#include "edgepipe/host.hpp"
#include "edgepipe/trace.hpp"
#include "edgepipe/worker_client.hpp"
#include "support.hpp"

using namespace edgepipe;
using edgepipe::testing::fixture;
using edgepipe::testing::LoopbackWorker;

namespace {

void expect_bit_equal(const ModelWeights& a, const ModelWeights& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t l = 0; l < a.size(); ++l) {
    ASSERT_EQ(a[l].size(), b[l].size()) << "layer " << l;
    for (std::size_t p = 0; p < a[l].size(); ++p) {
      EXPECT_TRUE(a[l][p].bit_equal(b[l][p])) << "layer " << l << " param " << p;
    }
  }
}

PipelineConfig config(std::size_t cut, std::size_t mb_size, std::size_t batches = 2) {
  PipelineConfig c;
  c.microbatches = 4;
  c.microbatch_size = mb_size;
  c.batches = batches;
  c.lr = 0.05;
  c.seed = 5;
  c.cut = cut;
  return c;
}

}  // namespace

TEST(Pipeline, MlpTrainingMatchesSerialBitExactly) {
  const ModelGraph g = load_model_config(fixture("mlp.cfg")).with_batch(4);
  const ModelWeights w = init_weights(g, 5);
  const PipelineConfig c = config(3, 4, 3);
  LoopbackWorker worker;
  auto client = WorkerClient::connect(worker.address());
  const ExperimentResult piped = run_experiment(g, w, c, RunMode::kPipelined, client.get());
  const ExperimentResult serial = run_experiment(g, w, c, RunMode::kBaseline);
  expect_bit_equal(piped.final_weights, serial.final_weights);
  ASSERT_EQ(piped.batches.size(), 3u);
  for (std::size_t b = 0; b < 3; ++b) EXPECT_EQ(piped.batches[b].loss, serial.batches[b].loss);
  for (const auto& r : piped.batches) EXPECT_TRUE(r.schedule_violations.empty()) << r.schedule_violations.front();
}

TEST(Pipeline, ResnetTrainingMatchesSerialAtEveryLegalCutSample) {
  const ModelGraph g = load_model_config(fixture("mini-resnet.cfg")).with_batch(2);
  const ModelWeights w = init_weights(g, 5);
  for (std::size_t cut : {1u, 6u, 16u, 25u}) {
    const PipelineConfig c = config(cut, 2, 1);
    LoopbackWorker worker;
    auto client = WorkerClient::connect(worker.address());
    const ExperimentResult piped = run_experiment(g, w, c, RunMode::kPipelined, client.get());
    const ExperimentResult serial = run_experiment(g, w, c, RunMode::kBaseline);
    SCOPED_TRACE("cut " + std::to_string(cut));
    expect_bit_equal(piped.final_weights, serial.final_weights);
  }
}

TEST(Pipeline, IllegalCutRejected) {
  const ModelGraph g = load_model_config(fixture("mini-resnet.cfg")).with_batch(2);
  EXPECT_THROW(config(4, 2).validate(g), Error);
  EXPECT_NO_THROW(config(6, 2).validate(g));
}

TEST(Pipeline, InferenceMatchesSerial) {
  const ModelGraph g = load_model_config(fixture("mini-resnet.cfg")).with_batch(2);
  const ModelWeights w = init_weights(g, 8);
  PipelineConfig c = config(11, 2);
  LoopbackWorker worker;
  auto client = WorkerClient::connect(worker.address());
  PipelineHost host(g, w, c, *client);
  host.load();
  SerialTrainer serial(g, w, c);
  for (std::uint32_t b = 0; b < 3; ++b) {
    const Batch data = synthetic_batch(g, c.seed, b, c.microbatches);
    EXPECT_TRUE(host.infer_batch(b, data.inputs).bit_equal(serial.infer_batch(b, data.inputs)));
  }
  // One microbatch is the degenerate pipeline.
  c.microbatches = 1;
  PipelineHost single(g, w, c, *client);
  single.load();
  SerialTrainer serial1(g, w, c);
  const Batch one = synthetic_batch(g, c.seed, 0, 1);
  EXPECT_TRUE(single.infer_batch(0, one.inputs).bit_equal(serial1.infer_batch(0, one.inputs)));
}

TEST(Pipeline, EmptyBatchIsAnError) {
  const ModelGraph g = load_model_config(fixture("mlp.cfg")).with_batch(4);
  LoopbackWorker worker;
  auto client = WorkerClient::connect(worker.address());
  PipelineHost host(g, init_weights(g, 1), config(3, 4), *client);
  host.load();
  EXPECT_THROW(host.infer_batch(0, Tensor(DType::kF32, {0, 32})), Error);
  EXPECT_THROW(host.train_batch(0, Tensor(DType::kF32, {0, 32}), Tensor(DType::kI64, {0})), Error);
}

TEST(Pipeline, ZeroLearningRateKeepsWeights) {
  const ModelGraph g = load_model_config(fixture("mlp.cfg")).with_batch(4);
  const ModelWeights w = init_weights(g, 1);
  PipelineConfig c = config(3, 4);
  c.lr = 0.0;
  LoopbackWorker worker;
  auto client = WorkerClient::connect(worker.address());
  expect_bit_equal(run_experiment(g, w, c, RunMode::kPipelined, client.get()).final_weights, w);
}

TEST(Pipeline, NanInputAbortsWithDiagnosticAndSessionRecovers) {
  const ModelGraph g = load_model_config(fixture("mlp.cfg")).with_batch(4);
  const ModelWeights w = init_weights(g, 1);
  const PipelineConfig c = config(3, 4);
  LoopbackWorker worker;
  auto client = WorkerClient::connect(worker.address());
  PipelineHost host(g, w, c, *client);
  host.load();
  Batch data = synthetic_batch(g, c.seed, 0, c.microbatches);
  Tensor bad = data.inputs;
  bad.mutable_values<float>()[5] = std::numeric_limits<float>::quiet_NaN();
  try {
    host.train_batch(0, bad, data.labels);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNanLoss) << e.what();
  }
  // Weights untouched and the next batch runs normally.
  expect_bit_equal(host.full_weights(), w);
  const BatchReport r = host.train_batch(0, data.inputs, data.labels);
  EXPECT_TRUE(std::isfinite(r.loss));
}

TEST(Pipeline, ReportAndTraceAreConsistent) {
  const ModelGraph g = load_model_config(fixture("mlp.cfg")).with_batch(4);
  const PipelineConfig c = config(3, 4, 2);
  TraceRecorder rec;
  LoopbackWorker worker;
  auto client = WorkerClient::connect(worker.address());
  const ExperimentResult r = run_experiment(g, init_weights(g, 1), c, RunMode::kPipelined, client.get(), &rec);
  const auto events = rec.snapshot();
  EXPECT_TRUE(check_lane_exclusivity(events).empty());
  std::size_t fwd = 0, bwd = 0;
  for (const auto& e : events) {
    fwd += e.kind == TraceKind::kForward && e.device == Device::kStage0;
    bwd += e.kind == TraceKind::kBackward && e.device == Device::kStage0;
  }
  EXPECT_EQ(fwd, c.microbatches * c.batches);
  EXPECT_EQ(bwd, c.microbatches * c.batches);
  for (const auto& b : r.batches) {
    EXPECT_NEAR(b.stage0_busy_ms + b.stage0_idle_ms, b.wall_ms, 0.01);
    EXPECT_NEAR(b.stage1_busy_ms + b.stage1_idle_ms, b.wall_ms, 0.01);
  }
  EXPECT_EQ(r.summary.config, experiment_key(g, c));
}

TEST(Pipeline, BaselineComparisonRequiresSameConfig) {
  RunSummary a = summarize_series("a", {1, 2});
  RunSummary b = summarize_series("b", {1, 1});
  a.config = "mlp N=2 M=4 mb=4";
  b.config = "mlp N=2 M=8 mb=4";
  try {
    percent_decrease(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kConfigMismatch);
  }
}

TEST(Pipeline, SyntheticModeFollowsTheMakespanLaw) {
  const ModelGraph g = load_model_config(fixture("mini-resnet.cfg"));
  PipelineConfig c;
  c.microbatches = 4;
  c.microbatch_size = g.input_shape[0];
  c.batches = 1;
  c.cut = 12;
  // 20 ms per stage
  CostModel costs = CostModel::uniform(g.size(), 0, 0);
  costs.forward[0] = costs.backward[0] = 0.01;
  costs.forward[24] = costs.backward[24] = 0.01;
  c.synthetic_costs = costs;
  WorkerOptions o;
  o.simulate_costs = "default fwd=0 bwd=0\n0 fwd=0.01 bwd=0.01\n24 fwd=0.01 bwd=0.01\n";
  LoopbackWorker worker(o);
  auto client = WorkerClient::connect(worker.address());
  const ExperimentResult r = run_experiment(g, init_weights(g, 1), c, RunMode::kPipelined, client.get());
  // (M+1)·t = 100 ms; generous band here, the acceptance run pins 5%.
  EXPECT_GT(r.batches[0].wall_ms, 95.0);
  EXPECT_LT(r.batches[0].wall_ms, 130.0);
}
