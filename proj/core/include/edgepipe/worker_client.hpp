// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "edgepipe/messages.hpp"
#include "edgepipe/tool_queue.hpp"
#include "edgepipe/wire.hpp"

namespace edgepipe {

// Host end of a worker session. A reader thread splits incoming frames into a
// compute inbox (replies to model requests, in FIFO order) and a tool inbox.
// Compute requests may be pipelined; tool requests are one at a time.
class WorkerClient {
 public:
  struct Inbound {
    wire::Frame frame;
    std::int64_t header_us = 0;  // header arrived
    std::int64_t decoded_us = 0;  // payload fully read
  };

  explicit WorkerClient(std::unique_ptr<wire::Connection> conn);
  static std::unique_ptr<WorkerClient> connect(const std::string& address,
                                               std::chrono::milliseconds timeout =
                                                   std::chrono::seconds(10));
  ~WorkerClient();
  WorkerClient(const WorkerClient&) = delete;
  WorkerClient& operator=(const WorkerClient&) = delete;

  const wire::Session& session() const noexcept { return session_; }

  // ---- compute lane
  void post(const wire::Frame& request);
  Inbound next_compute();
  // post + next_compute + expect_kind.
  wire::Frame call(const wire::Frame& request, wire::FrameKind reply_kind);

  void load_partition(const Bytes& blob);
  void step(double lr);
  std::vector<Tensor> fetch_weights();
  wire::ThermalReportMsg thermal();

  // ---- tool lane
  std::uint64_t tool_begin(const std::string& tool, const Bytes& args);
  void tool_set_delay(const std::string& tool, double seconds);
  ToolResult tool_retrieve(std::optional<std::chrono::milliseconds> timeout);

  // Sends SHUTDOWN (the worker exits its serve loop) and closes.
  void shutdown_worker();
  // Drops the connection without SHUTDOWN; the worker returns to accepting.
  void close() noexcept;

 private:
  struct Inbox {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Inbound> q;
  };

  void read_loop();
  Inbound take(Inbox& box);
  wire::Frame tool_call(const wire::Frame& request);

  std::unique_ptr<wire::Connection> conn_;
  wire::Session session_;
  Inbox compute_;
  Inbox tools_;
  std::mutex tool_mu_;
  std::mutex state_mu_;
  bool closed_ = false;
  std::exception_ptr failure_;
  std::thread reader_;
};

}  // namespace edgepipe
