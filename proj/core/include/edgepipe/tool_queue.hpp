// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "edgepipe/bytes.hpp"
#include "edgepipe/messages.hpp"
#include "edgepipe/trace.hpp"

namespace edgepipe {

struct ToolResult {
  std::uint64_t ticket = 0;
  std::string tool;
  wire::ToolStatus status = wire::ToolStatus::kDone;
  std::int64_t start_us = 0;  // includes any injected delay
  std::int64_t end_us = 0;
  Bytes payload;  // tool output, or the error text when failed

  wire::ToolResultMsg to_msg() const;
  static ToolResult from_msg(const wire::ToolResultMsg& m);
};

// Tickets start at 1 and are executed one at a time, in ticket order, on a
// dedicated thread. Results are handed back oldest first.
class ToolQueue {
 public:
  using ToolFn = std::function<Bytes(const Bytes& args)>;
  using Timeout = std::optional<std::chrono::milliseconds>;  // nullopt waits forever

  explicit ToolQueue(std::size_t capacity = 64, TraceRecorder* trace = nullptr);
  ~ToolQueue();
  ToolQueue(const ToolQueue&) = delete;
  ToolQueue& operator=(const ToolQueue&) = delete;

  void register_tool(const std::string& name, ToolFn fn);
  bool has_tool(const std::string& name) const;

  // Delay slept on the tool lane before the tool runs. Throws kInvalidArgument
  // for negative or non-finite values and kUnknownTool for unknown names.
  void set_delay(const std::string& name, double seconds);
  double delay(const std::string& name) const;

  // Throws kUnknownTool or kQueueFull; neither consumes a ticket id.
  std::uint64_t begin(const std::string& name, Bytes args);

  // Oldest not-yet-retrieved ticket. Throws kNothingPending when there is
  // none and kNotReady on timeout (the ticket stays pending).
  ToolResult retrieve(Timeout timeout = std::nullopt);

  std::size_t pending() const;
  std::uint64_t next_ticket() const;
  std::size_t capacity() const noexcept { return capacity_; }

  // Drops every ticket and delay and restarts ids at 1. A tool already
  // running finishes but its result is discarded. Waiters get kNothingPending.
  void reset();

 private:
  struct Job {
    std::uint64_t ticket = 0;
    std::string tool;
    Bytes args;
    std::optional<ToolResult> result;
  };

  void run();

  const std::size_t capacity_;
  TraceRecorder* trace_;
  mutable std::mutex mu_;
  std::condition_variable work_cv_;    // executor waits for jobs
  std::condition_variable done_cv_;    // retrievers wait for results
  std::map<std::string, ToolFn> tools_;
  std::map<std::string, double> delays_;
  std::deque<Job> jobs_;               // not yet retrieved, ticket order
  std::uint64_t next_ticket_ = 1;
  std::uint64_t epoch_ = 0;            // bumped by reset()
  bool stop_ = false;
  std::thread worker_;
};

}  // namespace edgepipe
