// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/host.hpp"

#include <cmath>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "edgepipe/error.hpp"
#include "edgepipe/messages.hpp"
#include "edgepipe/worker_client.hpp"

namespace edgepipe {

using wire::Frame;
using wire::FrameKind;

void PipelineConfig::validate(const ModelGraph& graph) const {
  if (microbatches < 1) fail(Errc::kInvalidArgument, "microbatch count must be >= 1");
  if (microbatch_size < 1) fail(Errc::kInvalidArgument, "microbatch size must be >= 1");
  if (!std::isfinite(lr) || lr < 0.0) {
    fail(Errc::kInvalidArgument, fmt::format("learning rate must be finite and >= 0, got {}", lr));
  }
  if (!graph.is_legal_cut(cut)) {
    fail(Errc::kInvalidArgument, fmt::format("cut {} is not legal for '{}'", cut, graph.name));
  }
  if (synthetic_costs) synthetic_costs->validate(graph.size());
}

namespace {

void sleep_seconds(double s) {
  if (s > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(s));
}

double ms_between(std::int64_t a, std::int64_t b) { return static_cast<double>(b - a) / 1000.0; }

std::string mb_label(const char* prefix, std::size_t mb) { return fmt::format("{}{}", prefix, mb + 1); }

// Regroups a flat parameter list into one entry per layer.
ModelWeights regroup(const std::vector<LayerSpec>& layers, std::vector<Tensor> flat) {
  ModelWeights out;
  std::size_t at = 0;
  for (const auto& l : layers) {
    const std::size_t n = l.param_shapes().size();
    if (at + n > flat.size()) fail(Errc::kMissingWeight, "worker returned too few parameters");
    out.emplace_back(std::make_move_iterator(flat.begin() + static_cast<std::ptrdiff_t>(at)),
                     std::make_move_iterator(flat.begin() + static_cast<std::ptrdiff_t>(at + n)));
    at += n;
  }
  if (at != flat.size()) fail(Errc::kProtocol, "worker returned too many parameters");
  return out;
}

}  // namespace

// Serializes and writes queued requests in order, off the compute thread.
struct PipelineHost::Sender {
  struct Job {
    std::function<Frame()> build;
    std::uint32_t batch = 0;
    std::size_t mb = 0;
  };

  Sender(WorkerClient& w, TraceRecorder* t) : worker(w), trace(t), thread([this] { run(); }) {}
  ~Sender() {
    {
      std::lock_guard lk(mu);
      stop = true;
    }
    cv.notify_all();
    thread.join();
  }

  void begin_batch(std::size_t m) {
    std::lock_guard lk(mu);
    start_us.assign(m, 0);
    end_us.assign(m, 0);
  }

  void push(Job j) {
    {
      std::lock_guard lk(mu);
      q.push_back(std::move(j));
    }
    cv.notify_all();
  }

  // Blocks until every queued job has been written.
  void drain() {
    std::unique_lock lk(mu);
    idle_cv.wait(lk, [&] { return q.empty() && !busy; });
  }

  void run() {
    std::unique_lock lk(mu);
    for (;;) {
      cv.wait(lk, [&] { return stop || !q.empty(); });
      if (stop) return;
      Job j = std::move(q.front());
      q.pop_front();
      busy = true;
      lk.unlock();
      const std::int64_t s = now_us();
      bool ok = true;
      try {
        worker.post(j.build());
      } catch (const Error&) {
        ok = false;  // the reader sees the broken connection
      }
      const std::int64_t e = now_us();
      if (!ok) worker.close();
      if (trace) {
        trace->record({s, e, Device::kStage0, TraceKind::kSend, j.batch,
                       static_cast<std::uint32_t>(j.mb + 1), mb_label("Send", j.mb)});
      }
      lk.lock();
      if (j.mb < start_us.size()) {
        start_us[j.mb] = s;
        end_us[j.mb] = e;
      }
      busy = false;
      if (q.empty()) idle_cv.notify_all();
    }
  }

  WorkerClient& worker;
  TraceRecorder* trace;
  std::mutex mu;
  std::condition_variable cv, idle_cv;
  std::deque<Job> q;
  bool busy = false;
  bool stop = false;
  std::vector<std::int64_t> start_us, end_us;
  std::thread thread;
};

PipelineHost::PipelineHost(const ModelGraph& graph, ModelWeights weights, PipelineConfig config,
                           WorkerClient& worker, TraceRecorder* trace)
    : graph_(graph.with_batch(config.microbatch_size)),
      init_weights_(std::move(weights)),
      config_(std::move(config)),
      worker_(worker),
      trace_(trace) {
  config_.validate(graph_);
  stage0_ = Stage::slice(graph_, init_weights_, 0, config_.cut);
  sender_ = std::make_unique<Sender>(worker_, trace_);
}

PipelineHost::~PipelineHost() = default;

void PipelineHost::load() {
  worker_.load_partition(
      serialize_partition(graph_, init_weights_, PartitionSpec::at(graph_, config_.cut)));
}

void PipelineHost::check_rows(const Tensor& inputs, const char* what) const {
  if (inputs.rank() == 0 || inputs.dim(0) == 0) {
    fail(Errc::kInvalidArgument, fmt::format("{}: empty batch", what));
  }
  Shape want = graph_.input_shape;
  want[0] = config_.batch_size();
  if (inputs.shape() != want) {
    fail(Errc::kShapeMismatch, fmt::format("{}: inputs {} do not match {} ({} x {})", what,
                                           shape_str(inputs.shape()), shape_str(want),
                                           config_.microbatches, config_.microbatch_size));
  }
}

Tensor PipelineHost::stage0_forward(std::uint32_t batch, std::size_t mb, const Tensor& x,
                                    bool training, StageTape* tape) {
  const std::int64_t s = now_us();
  Tensor out;
  if (config_.synthetic_costs) {
    sleep_seconds(config_.synthetic_costs->forward_seconds(0, config_.cut));
    out = Tensor(x.dtype(), graph_.cut_activation(config_.cut));
  } else {
    *tape = stage_forward(stage0_, x, StepKey{config_.seed, batch, mb, training});
    out = tape->output;
  }
  if (trace_) {
    trace_->record({s, now_us(), Device::kStage0, TraceKind::kForward, batch,
                    static_cast<std::uint32_t>(mb + 1), mb_label("F", mb)});
  }
  return out;
}

BatchReport PipelineHost::train_batch(std::uint32_t batch, const Tensor& inputs,
                                      const Tensor& labels) {
  check_rows(inputs, "train_batch");
  const std::size_t m = config_.microbatches, mbs = config_.microbatch_size;
  if (labels.dtype() != DType::kI64 || labels.shape() != Shape{m * mbs}) {
    fail(Errc::kShapeMismatch, "train_batch: labels must be I64 with one id per row");
  }
  BatchReport rep;
  rep.batch = batch;
  const std::int64_t t_begin = now_us();
  sender_->begin_batch(m);

  std::vector<StageTape> tapes(m);
  std::vector<std::int64_t> fwd_end(m);
  double s0_busy = 0.0, s1_busy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::int64_t s = now_us();
    const Tensor x = inputs.slice_rows(i * mbs, (i + 1) * mbs);
    Tensor act = stage0_forward(batch, i, x, true, &tapes[i]);
    fwd_end[i] = now_us();
    s0_busy += ms_between(s, fwd_end[i]);
    auto y = std::make_shared<Tensor>(labels.slice_rows(i * mbs, (i + 1) * mbs));
    auto a = std::make_shared<Tensor>(std::move(act));
    const std::uint64_t seed = config_.seed;
    sender_->push({[batch, i, seed, a, y] {
                     return wire::FwdBwdRequest{batch, static_cast<std::uint32_t>(i), seed, *a, *y}
                         .frame();
                   },
                   batch, i});
  }

  GradAccumulator acc;
  std::optional<Error> failure;
  double loss_sum = 0.0;
  struct Seen {
    std::int64_t recv_us = 0, fb_start = 0, fb_end = 0, hdr = 0, decoded = 0, bwd_start = 0;
  };
  std::vector<Seen> seen(m);
  for (std::size_t i = 0; i < m; ++i) {
    WorkerClient::Inbound in = worker_.next_compute();  // transport errors propagate
    if (in.frame.kind == FrameKind::kError) {
      const auto err = wire::ErrorMsg::parse(in.frame);
      if (!failure) {
        failure.emplace(err.code, fmt::format("batch {} aborted at microbatch {}: worker: {}",
                                              batch, i + 1, err.message));
      }
      continue;
    }
    wire::GradResponse g;
    try {
      wire::expect_kind(in.frame, FrameKind::kGradResp);
      g = wire::GradResponse::parse(in.frame);
      if (g.batch != batch || g.microbatch != i) {
        fail(Errc::kProtocol, fmt::format("expected GRAD_RESP for {}/{}, got {}/{}", batch, i,
                                          g.batch, g.microbatch));
      }
    } catch (const Error& e) {
      if (!failure) failure.emplace(e.code(), e.what());
      continue;
    }
    seen[i] = {g.recv_us, g.start_us, g.end_us, in.header_us, in.decoded_us, 0};
    s1_busy += ms_between(g.start_us, g.end_us);
    if (trace_) {
      trace_->record({g.start_us, g.end_us, Device::kStage1, TraceKind::kFwdBwd, batch,
                      static_cast<std::uint32_t>(i + 1), mb_label("FB", i)});
      trace_->record({in.header_us, in.decoded_us, Device::kStage0, TraceKind::kRecv, batch,
                      static_cast<std::uint32_t>(i + 1), mb_label("Recv", i)});
    }
    const double loss = config_.synthetic_costs ? 0.0 : g.loss.at_as_double(0);
    if (!std::isfinite(loss) && !failure) {
      failure.emplace(Errc::kNanLoss,
                      fmt::format("batch {} microbatch {}: loss is {}", batch, i + 1, loss));
    }
    if (failure) continue;
    loss_sum += loss;

    const std::int64_t s = now_us();
    seen[i].bwd_start = s;
    if (config_.synthetic_costs) {
      sleep_seconds(config_.synthetic_costs->backward_seconds(0, config_.cut));
    } else {
      StageGrads sg = stage_backward(stage0_, tapes[i], g.grad);
      acc.add(sg.param_grads);
      tapes[i] = StageTape{};
    }
    const std::int64_t e = now_us();
    s0_busy += ms_between(s, e);
    if (trace_) {
      trace_->record({s, e, Device::kStage0, TraceKind::kBackward, batch,
                      static_cast<std::uint32_t>(i + 1), mb_label("B", i)});
    }
  }
  sender_->drain();
  if (failure) throw *failure;

  const std::int64_t s = now_us();
  if (!config_.synthetic_costs) apply_sgd(stage0_.params, acc.mean(), config_.lr);
  worker_.step(config_.lr);
  const std::int64_t e = now_us();
  s0_busy += ms_between(s, e);
  if (trace_) trace_->record({s, e, Device::kStage0, TraceKind::kStep, batch, 0, "Step"});

  rep.wall_ms = ms_between(t_begin, e);
  rep.loss = loss_sum / static_cast<double>(m);
  rep.stage0_busy_ms = s0_busy;
  rep.stage0_idle_ms = std::max(0.0, rep.wall_ms - s0_busy);
  rep.stage1_busy_ms = s1_busy;
  rep.stage1_idle_ms = std::max(0.0, rep.wall_ms - s1_busy);

  if (config_.check_schedule) {
    std::lock_guard lk(sender_->mu);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& v = seen[i];
      const auto bad = [&](const char* what) {
        rep.schedule_violations.push_back(fmt::format("batch {} mb {}: {}", batch, i + 1, what));
      };
      if (sender_->start_us[i] < fwd_end[i]) bad("Send started before Forward finished");
      if (v.recv_us < sender_->start_us[i]) bad("worker received before Send started");
      if (v.fb_start < v.recv_us) bad("FwdBwd started before the request arrived");
      if (v.hdr < v.fb_end) bad("GRAD_RESP arrived before FwdBwd finished");
      if (v.bwd_start < v.decoded) bad("Backward started before GRAD_RESP was received");
    }
  }
  last_ = rep;
  return rep;
}

Tensor PipelineHost::infer_batch(std::uint32_t batch, const Tensor& inputs) {
  check_rows(inputs, "infer_batch");
  const std::size_t m = config_.microbatches, mbs = config_.microbatch_size;
  BatchReport rep;
  rep.batch = batch;
  const std::int64_t t_begin = now_us();
  sender_->begin_batch(m);
  double s0_busy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::int64_t s = now_us();
    StageTape tape;
    auto a = std::make_shared<Tensor>(
        stage0_forward(batch, i, inputs.slice_rows(i * mbs, (i + 1) * mbs), false, &tape));
    s0_busy += ms_between(s, now_us());
    const std::uint64_t seed = config_.seed;
    sender_->push({[batch, i, seed, a] {
                     return wire::FwdRequest{batch, static_cast<std::uint32_t>(i), seed, *a}.frame();
                   },
                   batch, i});
  }
  std::vector<Tensor> outs;
  std::optional<Error> failure;
  for (std::size_t i = 0; i < m; ++i) {
    WorkerClient::Inbound in = worker_.next_compute();
    try {
      wire::expect_kind(in.frame, FrameKind::kTensor);
      outs.push_back(wire::decode_tensor(in.frame.payload));
    } catch (const Error& e) {
      if (!failure) {
        failure.emplace(e.code(),
                        fmt::format("inference batch {} aborted at microbatch {}: {}", batch,
                                    i + 1, e.what()));
      }
      continue;
    }
    if (trace_) {
      trace_->record({in.header_us, in.decoded_us, Device::kStage0, TraceKind::kRecv, batch,
                      static_cast<std::uint32_t>(i + 1), mb_label("Recv", i)});
    }
  }
  sender_->drain();
  if (failure) throw *failure;
  rep.wall_ms = ms_between(t_begin, now_us());
  rep.stage0_busy_ms = s0_busy;
  rep.stage0_idle_ms = std::max(0.0, rep.wall_ms - s0_busy);
  rep.stage1_idle_ms = rep.wall_ms;
  last_ = rep;
  return concat_rows(outs);
}

ModelWeights PipelineHost::full_weights() {
  ModelWeights all = stage0_.params;
  const std::vector<LayerSpec> rest(graph_.layers.begin() + static_cast<std::ptrdiff_t>(config_.cut),
                                    graph_.layers.end());
  for (auto& l : regroup(rest, worker_.fetch_weights())) all.push_back(std::move(l));
  return all;
}

// ---- serial reference ---------------------------------------------------------

SerialTrainer::SerialTrainer(const ModelGraph& graph, ModelWeights weights, PipelineConfig config,
                             TraceRecorder* trace)
    : graph_(graph.with_batch(config.microbatch_size)), config_(std::move(config)), trace_(trace) {
  if (config_.microbatches < 1 || config_.microbatch_size < 1) {
    fail(Errc::kInvalidArgument, "microbatch count and size must be >= 1");
  }
  if (config_.synthetic_costs) config_.synthetic_costs->validate(graph_.size());
  whole_ = Stage::slice(graph_, weights, 0, graph_.size());
}

BatchReport SerialTrainer::train_batch(std::uint32_t batch, const Tensor& inputs,
                                       const Tensor& labels) {
  const std::size_t m = config_.microbatches, mbs = config_.microbatch_size;
  if (inputs.rank() == 0 || inputs.dim(0) != m * mbs || labels.shape() != Shape{m * mbs}) {
    fail(Errc::kShapeMismatch, "serial train_batch: batch does not match M x microbatch size");
  }
  BatchReport rep;
  rep.batch = batch;
  const std::int64_t t_begin = now_us();
  GradAccumulator acc;
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    std::int64_t s = now_us();
    if (config_.synthetic_costs) {
      sleep_seconds(config_.synthetic_costs->forward_seconds(0, graph_.size()));
    } else {
      const Tensor x = inputs.slice_rows(i * mbs, (i + 1) * mbs);
      const Tensor y = labels.slice_rows(i * mbs, (i + 1) * mbs);
      const StageTape tape = stage_forward(whole_, x, StepKey{config_.seed, batch, i, true}, &y);
      const double loss = tape.output.at_as_double(0);
      if (!std::isfinite(loss)) {
        fail(Errc::kNanLoss, fmt::format("batch {} microbatch {}: loss is {}", batch, i + 1, loss));
      }
      loss_sum += loss;
      if (trace_) {
        trace_->record({s, now_us(), Device::kStage0, TraceKind::kForward, batch,
                        static_cast<std::uint32_t>(i + 1), mb_label("F", i)});
      }
      s = now_us();
      acc.add(stage_backward(whole_, tape, unit_seed_grad(x.dtype())).param_grads);
    }
    if (config_.synthetic_costs) {
      if (trace_) {
        trace_->record({s, now_us(), Device::kStage0, TraceKind::kForward, batch,
                        static_cast<std::uint32_t>(i + 1), mb_label("F", i)});
      }
      s = now_us();
      sleep_seconds(config_.synthetic_costs->backward_seconds(0, graph_.size()));
    }
    if (trace_) {
      trace_->record({s, now_us(), Device::kStage0, TraceKind::kBackward, batch,
                      static_cast<std::uint32_t>(i + 1), mb_label("B", i)});
    }
  }
  const std::int64_t s = now_us();
  if (!config_.synthetic_costs) apply_sgd(whole_.params, acc.mean(), config_.lr);
  const std::int64_t e = now_us();
  if (trace_) trace_->record({s, e, Device::kStage0, TraceKind::kStep, batch, 0, "Step"});
  rep.wall_ms = ms_between(t_begin, e);
  rep.loss = loss_sum / static_cast<double>(m);
  rep.stage0_busy_ms = rep.wall_ms;
  rep.stage1_idle_ms = rep.wall_ms;
  return rep;
}

Tensor SerialTrainer::infer_batch(std::uint32_t batch, const Tensor& inputs) {
  const std::size_t m = config_.microbatches, mbs = config_.microbatch_size;
  if (inputs.rank() == 0 || inputs.dim(0) == 0) {
    fail(Errc::kInvalidArgument, "serial infer_batch: empty batch");
  }
  if (inputs.dim(0) != m * mbs) {
    fail(Errc::kShapeMismatch, "serial infer_batch: batch does not match M x microbatch size");
  }
  std::vector<Tensor> outs;
  for (std::size_t i = 0; i < m; ++i) {
    if (config_.synthetic_costs) {
      sleep_seconds(config_.synthetic_costs->forward_seconds(0, graph_.size()));
      outs.emplace_back(inputs.dtype(), graph_.output_shapes.back());
    } else {
      outs.push_back(stage_forward(whole_, inputs.slice_rows(i * mbs, (i + 1) * mbs),
                                   StepKey{config_.seed, batch, i, false})
                         .output);
    }
  }
  return concat_rows(outs);
}

// ---- experiments ----------------------------------------------------------------

std::string experiment_key(const ModelGraph& graph, const PipelineConfig& config) {
  return fmt::format("{} N={} M={} mb={}", graph.name.empty() ? "model" : graph.name,
                     config.batches, config.microbatches, config.microbatch_size);
}

ExperimentResult run_experiment(const ModelGraph& graph, const ModelWeights& weights,
                                const PipelineConfig& config, RunMode mode, WorkerClient* worker,
                                TraceRecorder* trace, const RunSummary* baseline) {
  if (config.batches < 1) fail(Errc::kInvalidArgument, "experiment needs at least one batch");
  const ModelGraph g = graph.with_batch(config.microbatch_size);
  const DType dtype = weights.empty() || weights[0].empty() ? DType::kF32 : weights[0][0].dtype();
  ExperimentResult res;
  std::vector<double> ms;
  const auto run = [&](auto& trainer) {
    for (std::size_t b = 0; b < config.batches; ++b) {
      const Batch data = synthetic_batch(g, config.seed, b, config.microbatches, dtype);
      res.batches.push_back(
          trainer.train_batch(static_cast<std::uint32_t>(b), data.inputs, data.labels));
      ms.push_back(res.batches.back().wall_ms);
    }
  };
  std::string name;
  if (mode == RunMode::kPipelined) {
    if (!worker) fail(Errc::kInvalidArgument, "pipelined run needs a worker");
    PipelineHost host(graph, weights, config, *worker, trace);
    host.load();
    run(host);
    res.final_weights = host.full_weights();
    name = "pipelined";
  } else {
    SerialTrainer serial(graph, weights, config, trace);
    run(serial);
    res.final_weights = serial.weights();
    name = "baseline";
  }
  res.summary = summarize_series(name, ms);
  res.summary.config = experiment_key(g, config);
  double s0 = 0, s0i = 0, s1 = 0, s1i = 0;
  for (const auto& r : res.batches) {
    s0 += r.stage0_busy_ms;
    s0i += r.stage0_idle_ms;
    s1 += r.stage1_busy_ms;
    s1i += r.stage1_idle_ms;
  }
  res.summary.devices["stage0"] = {s0 / 1000.0, s0i / 1000.0};
  if (mode == RunMode::kPipelined) res.summary.devices["stage1"] = {s1 / 1000.0, s1i / 1000.0};
  if (baseline) res.summary.percent_decrease = percent_decrease(*baseline, res.summary);
  return res;
}

}  // namespace edgepipe
