// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "edgepipe/executor.hpp"
#include "edgepipe/messages.hpp"
#include "edgepipe/planner.hpp"
#include "edgepipe/thermal.hpp"
#include "edgepipe/tool_queue.hpp"
#include "edgepipe/trace.hpp"
#include "edgepipe/vector_index.hpp"
#include "edgepipe/wire.hpp"

namespace edgepipe {

namespace net {
class Listener;
}

struct WorkerOptions {
  // Reject partitions whose weights plus per-microbatch activations exceed
  // this many bytes. 0 disables the check.
  std::uint64_t max_bytes = 0;
  // Cost file text; when set, compute is replaced by sleeps of the listed
  // per-layer durations (parsed against the model's layer count at load).
  std::optional<std::string> simulate_costs;
  ThermalConfig thermal;
  std::size_t tool_capacity = 64;
  std::shared_ptr<const VectorIndex> index;  // defaults to default_index()
  TraceRecorder* trace = nullptr;
  wire::ProtocolVersion version = wire::kProtocolVersion;
  std::uint64_t max_payload = wire::kDefaultMaxPayload;
};

// Everything a session can change, for isolation checks.
struct WorkerSnapshot {
  bool has_partition = false;
  std::size_t first_layer = 0;
  std::size_t layer_count = 0;
  std::size_t accumulated = 0;
  double heat = 0.0;
  std::size_t pending_tools = 0;
  std::uint64_t next_ticket = 1;
  bool tool_delays_clear = true;

  bool operator==(const WorkerSnapshot&) const = default;
};

// Stage-1 compute state with no I/O.
class WorkerCore {
 public:
  explicit WorkerCore(const WorkerOptions& options);

  void load_partition(Partition p);
  bool has_partition() const noexcept { return partition_.has_value(); }
  const Partition& partition() const;

  struct FwdBwdResult {
    Tensor loss;
    Tensor grad;
    std::int64_t start_us = 0;
    std::int64_t end_us = 0;
  };
  // Forward through the loss and backward to the cut in one call. Stage-1
  // parameter gradients accumulate until apply_step.
  FwdBwdResult exec_fwdbwd(const wire::FwdBwdRequest& req);
  Tensor exec_forward(const wire::FwdRequest& req);
  void apply_step(double lr);
  std::vector<Tensor> fetch_weights() const;

  ThermalState thermal_advance(double busy_seconds, double idle_seconds);
  wire::ThermalReportMsg thermal_report() const;
  const ThermalModel& thermal() const noexcept { return thermal_; }

  std::size_t accumulated() const noexcept { return accumulated_; }
  void reset();

 private:
  void require_partition(const char* what) const;
  void check_input(const Tensor& activations) const;
  // Sleeps `base` scaled by the throttle multiplier, then advances the
  // thermal model.
  void simulate(double base_seconds);
  void account(std::int64_t start_us, std::int64_t end_us);

  WorkerOptions options_;
  std::optional<Partition> partition_;
  Stage stage_;
  std::optional<CostModel> costs_;
  GradAccumulator grads_;
  std::size_t accumulated_ = 0;
  ThermalModel thermal_;
  std::int64_t last_end_us_ = 0;
};

// Serves host sessions one at a time. Within a session the reader thread
// dispatches compute frames to a FIFO compute lane, answers tool begins
// directly, and hands retrieves to a separate responder so a blocked retrieve
// never stalls compute.
class WorkerServer {
 public:
  explicit WorkerServer(WorkerOptions options = {});
  ~WorkerServer();
  WorkerServer(const WorkerServer&) = delete;
  WorkerServer& operator=(const WorkerServer&) = delete;

  // Runs one session to completion and resets all session state. Returns
  // true when the host sent SHUTDOWN.
  bool serve_connection(wire::Connection& conn);

  // Binds, then accepts sessions until SHUTDOWN or stop(). `on_bound` (if
  // given) receives the bound port before the first accept.
  void serve(const std::string& listen_address,
             const std::function<void(std::uint16_t)>& on_bound = {});
  void stop();

  // Test hook: state as of the last completed frame.
  WorkerSnapshot snapshot() const;
  std::size_t sessions_served() const noexcept { return sessions_; }

 private:
  WorkerOptions options_;
  mutable std::mutex core_mu_;
  WorkerCore core_;
  ToolQueue tools_;
  std::atomic<std::size_t> sessions_{0};
  std::mutex listener_mu_;
  net::Listener* listener_ = nullptr;
  wire::Connection* active_ = nullptr;
  std::atomic<bool> stopping_{false};
};

// Bytes a partition needs on the worker: weights, the gradient accumulator,
// and every activation of one microbatch.
std::uint64_t partition_footprint(const Partition& p);

}  // namespace edgepipe
