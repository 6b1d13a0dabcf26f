// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/worker.hpp"

#include <cmath>
#include <condition_variable>
#include <deque>
#include <thread>

#include <fmt/format.h>

#include "edgepipe/error.hpp"
#include "edgepipe/net.hpp"
#include "edgepipe/tool_broker.hpp"

namespace edgepipe {

using wire::Frame;
using wire::FrameKind;

std::uint64_t partition_footprint(const Partition& p) {
  std::size_t width = 4;
  for (const auto& layer : p.weights) {
    if (!layer.empty()) {
      width = dtype_width(layer.front().dtype());
      break;
    }
  }
  std::uint64_t activations = shape_numel(p.input_shape);
  Shape s = p.input_shape;
  for (const auto& l : p.layers) {
    s = l.output_shape(s);
    activations += shape_numel(s);
  }
  return 2 * static_cast<std::uint64_t>(p.weight_bytes()) + activations * width;
}

// ---- core -------------------------------------------------------------------

WorkerCore::WorkerCore(const WorkerOptions& options)
    : options_(options), thermal_(options.thermal) {}

const Partition& WorkerCore::partition() const {
  require_partition("partition");
  return *partition_;
}

void WorkerCore::require_partition(const char* what) const {
  if (!partition_) fail(Errc::kNoPartition, fmt::format("{} before LOAD_PARTITION", what));
}

void WorkerCore::load_partition(Partition p) {
  if (p.layers.empty()) fail(Errc::kInvalidArgument, "partition has no layers");
  if (p.weights.size() != p.layers.size()) {
    fail(Errc::kMissingWeight, "partition weights do not cover every layer");
  }
  if (options_.max_bytes != 0) {
    const std::uint64_t need = partition_footprint(p);
    if (need > options_.max_bytes) {
      fail(Errc::kTooLarge, fmt::format("partition needs {} bytes, worker limit is {}", need,
                                        options_.max_bytes));
    }
  }
  std::optional<CostModel> costs;
  if (options_.simulate_costs) costs = parse_cost_file(*options_.simulate_costs, p.total_layers);
  Stage st;
  st.first_layer = p.first_layer;
  st.input_shape = p.input_shape;
  st.layers = p.layers;
  st.params = p.weights;
  st.output_shape();  // validates the layer chain
  stage_ = std::move(st);
  costs_ = std::move(costs);
  partition_ = std::move(p);
  grads_.clear();
  accumulated_ = 0;
}

void WorkerCore::check_input(const Tensor& activations) const {
  if (activations.shape() != stage_.input_shape) {
    fail(Errc::kShapeMismatch, fmt::format("activations {} do not match the cut shape {}",
                                           shape_str(activations.shape()),
                                           shape_str(stage_.input_shape)));
  }
}

void WorkerCore::simulate(double base_seconds) {
  const std::int64_t start = now_us();
  const double d = base_seconds * thermal_.compute_multiplier();
  std::this_thread::sleep_for(std::chrono::duration<double>(d));
  const double idle = last_end_us_ ? static_cast<double>(start - last_end_us_) / 1e6 : 0.0;
  thermal_.advance(d, std::max(0.0, idle));
  last_end_us_ = now_us();
}

void WorkerCore::account(std::int64_t start_us, std::int64_t end_us) {
  const double idle = last_end_us_ ? static_cast<double>(start_us - last_end_us_) / 1e6 : 0.0;
  thermal_.advance(static_cast<double>(end_us - start_us) / 1e6, std::max(0.0, idle));
  last_end_us_ = end_us;
}

WorkerCore::FwdBwdResult WorkerCore::exec_fwdbwd(const wire::FwdBwdRequest& req) {
  require_partition("FWDBWD_REQ");
  if (!stage_.ends_with_loss()) {
    fail(Errc::kInvalidArgument, "partition does not end with a loss layer; use FWD_REQ");
  }
  check_input(req.activations);
  const auto& labels = req.labels;
  if (labels.dtype() != DType::kI64 || labels.shape() != Shape{req.activations.dim(0)}) {
    fail(Errc::kShapeMismatch, fmt::format("labels must be I64 of shape ({}), got {} {}",
                                           req.activations.dim(0), dtype_name(labels.dtype()),
                                           shape_str(labels.shape())));
  }
  FwdBwdResult r;
  r.start_us = now_us();
  if (costs_) {
    simulate(costs_->stage_seconds(stage_.first_layer, stage_.end_layer()));
    r.loss = Tensor(req.activations.dtype(), Shape{});
    r.grad = Tensor(req.activations.dtype(), req.activations.shape());
  } else {
    const StageTape tape = stage_forward(stage_, req.activations,
                                         StepKey{req.seed, req.batch, req.microbatch, true}, &labels);
    const double loss = tape.output.at_as_double(0);
    if (!std::isfinite(loss)) {
      fail(Errc::kNanLoss, fmt::format("batch {} microbatch {}: stage-1 loss is {}", req.batch,
                                       req.microbatch, loss));
    }
    StageGrads g = stage_backward(stage_, tape, unit_seed_grad(req.activations.dtype()));
    grads_.add(g.param_grads);
    r.loss = tape.output;
    r.grad = std::move(g.grad_input);
  }
  ++accumulated_;
  r.end_us = now_us();
  if (!costs_) account(r.start_us, r.end_us);
  return r;
}

Tensor WorkerCore::exec_forward(const wire::FwdRequest& req) {
  require_partition("FWD_REQ");
  if (accumulated_ != 0) {
    fail(Errc::kProtocol,
         "forward-only request while a training batch is open; send STEP first");
  }
  check_input(req.activations);
  if (costs_) {
    simulate(costs_->forward_seconds(stage_.first_layer, stage_.end_layer()));
    return Tensor(req.activations.dtype(), stage_.output_shape());
  }
  const std::int64_t start = now_us();
  StageTape tape = stage_forward(stage_, req.activations,
                                 StepKey{req.seed, req.batch, req.microbatch, false});
  account(start, now_us());
  return std::move(tape.output);
}

void WorkerCore::apply_step(double lr) {
  require_partition("STEP");
  if (accumulated_ == 0) fail(Errc::kNoGrads, "STEP with no accumulated gradients");
  if (!costs_) apply_sgd(stage_.params, grads_.mean(), lr);
  grads_.clear();
  accumulated_ = 0;
}

std::vector<Tensor> WorkerCore::fetch_weights() const {
  require_partition("FETCH_WEIGHTS");
  std::vector<Tensor> out;
  for (const auto& layer : stage_.params) out.insert(out.end(), layer.begin(), layer.end());
  return out;
}

ThermalState WorkerCore::thermal_advance(double busy_seconds, double idle_seconds) {
  return thermal_.advance(busy_seconds, idle_seconds);
}

wire::ThermalReportMsg WorkerCore::thermal_report() const {
  return {static_cast<std::uint8_t>(thermal_.state()), thermal_.heat(),
          thermal_.compute_multiplier()};
}

void WorkerCore::reset() {
  partition_.reset();
  stage_ = Stage{};
  costs_.reset();
  grads_.clear();
  accumulated_ = 0;
  thermal_.reset();
  last_end_us_ = 0;
}

// ---- server -----------------------------------------------------------------

namespace {

template <typename T>
class Mailbox {
 public:
  void push(T v) {
    {
      std::lock_guard lk(mu_);
      q_.push_back(std::move(v));
    }
    cv_.notify_one();
  }
  void close() {
    {
      std::lock_guard lk(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }
  // nullopt once closed.
  std::optional<T> pop() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return closed_ || !q_.empty(); });
    if (closed_) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> q_;
  bool closed_ = false;
};

struct ComputeItem {
  Frame frame;
  std::int64_t recv_us = 0;
};

void send_quietly(wire::Connection& conn, const Frame& f) {
  try {
    conn.write_frame(f);
  } catch (const Error&) {
    // the reader sees the broken connection and ends the session
  }
}

bool is_compute_kind(FrameKind k) {
  switch (k) {
    case FrameKind::kLoadPartition:
    case FrameKind::kFwdReq:
    case FrameKind::kFwdBwdReq:
    case FrameKind::kStep:
    case FrameKind::kFetchWeights:
    case FrameKind::kThermalReport:
      return true;
    default:
      return false;
  }
}

}  // namespace

WorkerServer::WorkerServer(WorkerOptions options)
    : options_(std::move(options)),
      core_(options_),
      tools_(options_.tool_capacity, options_.trace) {
  auto index = options_.index ? options_.index
                              : std::make_shared<const VectorIndex>(default_index());
  register_vector_search(tools_, std::move(index));
}

WorkerServer::~WorkerServer() { stop(); }

bool WorkerServer::serve_connection(wire::Connection& conn) {
  {
    std::lock_guard lk(listener_mu_);
    active_ = &conn;
  }
  const auto finish = [&] {
    {
      std::lock_guard lk(listener_mu_);
      active_ = nullptr;
    }
    tools_.reset();
    {
      std::lock_guard lk(core_mu_);
      core_.reset();
    }
    ++sessions_;
  };
  try {
    const wire::Session s = wire::handshake(conn, wire::Role::kWorker, options_.version);
    if (s.peer != wire::Role::kHost) fail(Errc::kRoleConflict, "peer is not a host");
  } catch (const Error& e) {
    send_quietly(conn, wire::error_frame(e));
    finish();
    return false;
  }

  Mailbox<ComputeItem> compute;
  Mailbox<std::uint32_t> retrieves;
  TraceRecorder* trace = options_.trace;

  std::thread compute_lane([&] {
    while (auto item = compute.pop()) {
      const Frame& f = item->frame;
      Frame reply;
      try {
        std::lock_guard lk(core_mu_);
        switch (f.kind) {
          case FrameKind::kLoadPartition:
            core_.load_partition(deserialize_partition(f.payload));
            reply = wire::empty_frame(FrameKind::kLoadPartition);
            break;
          case FrameKind::kFwdBwdReq: {
            const auto req = wire::FwdBwdRequest::parse(f);
            auto r = core_.exec_fwdbwd(req);
            if (trace) {
              trace->record({r.start_us, r.end_us, Device::kStage1, TraceKind::kFwdBwd, req.batch,
                             req.microbatch + 1, fmt::format("FB{}", req.microbatch + 1)});
            }
            reply = wire::GradResponse{req.batch, req.microbatch, item->recv_us, r.start_us,
                                       r.end_us, std::move(r.loss), std::move(r.grad)}
                        .frame();
            break;
          }
          case FrameKind::kFwdReq: {
            const auto req = wire::FwdRequest::parse(f);
            const std::int64_t start = now_us();
            reply = wire::tensor_frame(core_.exec_forward(req));
            if (trace) {
              trace->record({start, now_us(), Device::kStage1, TraceKind::kForward, req.batch,
                             req.microbatch + 1, fmt::format("F{}", req.microbatch + 1)});
            }
            break;
          }
          case FrameKind::kStep: {
            const auto req = wire::StepRequest::parse(f);
            const std::int64_t start = now_us();
            core_.apply_step(req.lr);
            if (trace) {
              trace->record({start, now_us(), Device::kStage1, TraceKind::kStep, 0, 0, "Step"});
            }
            reply = wire::empty_frame(FrameKind::kStep);
            break;
          }
          case FrameKind::kFetchWeights:
            if (!f.payload.empty()) fail(Errc::kProtocol, "FETCH_WEIGHTS carries no payload");
            reply = wire::WeightsResponse{core_.fetch_weights()}.frame();
            break;
          case FrameKind::kThermalReport:
            if (!f.payload.empty()) fail(Errc::kProtocol, "THERMAL_REPORT request carries no payload");
            reply = core_.thermal_report().frame();
            break;
          default:
            fail(Errc::kProtocol, fmt::format("unexpected {}", wire::frame_kind_name(f.kind)));
        }
      } catch (const Error& e) {
        reply = wire::error_frame(e);
      }
      send_quietly(conn, reply);
    }
  });

  std::thread retrieve_lane([&] {
    while (auto timeout_ms = retrieves.pop()) {
      Frame reply;
      try {
        ToolQueue::Timeout t;
        if (*timeout_ms != wire::kWaitForever) t = std::chrono::milliseconds(*timeout_ms);
        reply = tools_.retrieve(t).to_msg().frame();
      } catch (const Error& e) {
        reply = wire::error_frame(e, true);
      }
      send_quietly(conn, reply);
    }
  });

  bool shutdown = false;
  for (;;) {
    Frame f;
    std::int64_t recv_us = 0;
    try {
      f = conn.read_frame(&recv_us);
    } catch (const Error& e) {
      if (e.code() == Errc::kProtocol) {  // unknown kind, payload already skipped
        send_quietly(conn, wire::error_frame(e));
        continue;
      }
      if (e.code() == Errc::kOversize) send_quietly(conn, wire::error_frame(e));
      break;
    }
    if (f.kind == FrameKind::kShutdown) {
      shutdown = true;
      break;
    }
    if (is_compute_kind(f.kind)) {
      compute.push({std::move(f), recv_us});
      continue;
    }
    if (f.kind == FrameKind::kToolBegin) {
      try {
        const auto req = wire::ToolBeginRequest::parse(f);
        std::uint64_t ticket = 0;
        if (req.op == wire::ToolOp::kCall) {
          ticket = tools_.begin(req.tool, req.args);
        } else {
          tools_.set_delay(req.tool, req.delay_seconds);
        }
        send_quietly(conn, wire::ToolBeginAck{ticket}.frame());
      } catch (const Error& e) {
        send_quietly(conn, wire::error_frame(e, true));
      }
      continue;
    }
    if (f.kind == FrameKind::kToolRetrieve) {
      try {
        retrieves.push(wire::ToolRetrieveRequest::parse(f).timeout_ms);
      } catch (const Error& e) {
        send_quietly(conn, wire::error_frame(e, true));
      }
      continue;
    }
    send_quietly(conn, wire::error_frame(Error(
                           Errc::kProtocol, fmt::format("unexpected {} from host",
                                                        wire::frame_kind_name(f.kind)))));
  }

  compute.close();
  retrieves.close();
  tools_.reset();  // wakes a blocked retrieve
  compute_lane.join();
  retrieve_lane.join();
  finish();
  return shutdown;
}

void WorkerServer::serve(const std::string& listen_address,
                         const std::function<void(std::uint16_t)>& on_bound) {
  net::Listener listener(net::parse_endpoint(listen_address));
  {
    std::lock_guard lk(listener_mu_);
    if (stopping_) return;
    listener_ = &listener;
  }
  if (on_bound) on_bound(listener.port());
  while (!stopping_) {
    const int fd = listener.accept();
    if (fd < 0) break;
    wire::Connection conn(fd, options_.max_payload);
    if (serve_connection(conn)) break;
  }
  std::lock_guard lk(listener_mu_);
  listener_ = nullptr;
}

void WorkerServer::stop() {
  stopping_ = true;
  std::lock_guard lk(listener_mu_);
  if (listener_) listener_->close();
  if (active_) active_->shutdown();
}

WorkerSnapshot WorkerServer::snapshot() const {
  std::lock_guard lk(core_mu_);
  WorkerSnapshot s;
  s.has_partition = core_.has_partition();
  if (s.has_partition) {
    s.first_layer = core_.partition().first_layer;
    s.layer_count = core_.partition().layers.size();
  }
  s.accumulated = core_.accumulated();
  s.heat = core_.thermal().heat();
  s.pending_tools = tools_.pending();
  s.next_ticket = tools_.next_ticket();
  s.tool_delays_clear = tools_.delay(kVectorSearchTool) == 0.0;
  return s;
}

}  // namespace edgepipe
