// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/tool_queue.hpp"

#include <cmath>

#include <fmt/format.h>

#include "edgepipe/error.hpp"

namespace edgepipe {

wire::ToolResultMsg ToolResult::to_msg() const {
  wire::ToolResultMsg m;
  m.ticket = ticket;
  m.status = status;
  m.start_us = start_us;
  m.end_us = end_us;
  m.tool = tool;
  m.payload = payload;
  return m;
}

ToolResult ToolResult::from_msg(const wire::ToolResultMsg& m) {
  ToolResult r;
  r.ticket = m.ticket;
  r.tool = m.tool;
  r.status = m.status;
  r.start_us = m.start_us;
  r.end_us = m.end_us;
  r.payload = m.payload;
  return r;
}

ToolQueue::ToolQueue(std::size_t capacity, TraceRecorder* trace)
    : capacity_(capacity), trace_(trace) {
  if (capacity_ == 0) fail(Errc::kInvalidArgument, "tool queue capacity must be >= 1");
  worker_ = std::thread([this] { run(); });
}

ToolQueue::~ToolQueue() {
  {
    std::lock_guard lk(mu_);
    stop_ = true;
  }
  work_cv_.notify_all();
  done_cv_.notify_all();
  worker_.join();
}

void ToolQueue::register_tool(const std::string& name, ToolFn fn) {
  std::lock_guard lk(mu_);
  tools_[name] = std::move(fn);
}

bool ToolQueue::has_tool(const std::string& name) const {
  std::lock_guard lk(mu_);
  return tools_.count(name) != 0;
}

void ToolQueue::set_delay(const std::string& name, double seconds) {
  if (!std::isfinite(seconds) || seconds < 0.0) {
    fail(Errc::kInvalidArgument, fmt::format("delay must be a finite value >= 0, got {}", seconds));
  }
  std::lock_guard lk(mu_);
  if (!tools_.count(name)) fail(Errc::kUnknownTool, fmt::format("unknown tool '{}'", name));
  delays_[name] = seconds;
}

double ToolQueue::delay(const std::string& name) const {
  std::lock_guard lk(mu_);
  const auto it = delays_.find(name);
  return it == delays_.end() ? 0.0 : it->second;
}

std::uint64_t ToolQueue::begin(const std::string& name, Bytes args) {
  std::uint64_t ticket = 0;
  {
    std::lock_guard lk(mu_);
    if (!tools_.count(name)) fail(Errc::kUnknownTool, fmt::format("unknown tool '{}'", name));
    if (jobs_.size() >= capacity_) {
      fail(Errc::kQueueFull, fmt::format("tool queue full ({} pending)", jobs_.size()));
    }
    ticket = next_ticket_++;
    jobs_.push_back(Job{ticket, name, std::move(args), std::nullopt});
  }
  work_cv_.notify_all();
  return ticket;
}

ToolResult ToolQueue::retrieve(Timeout timeout) {
  std::unique_lock lk(mu_);
  if (jobs_.empty()) fail(Errc::kNothingPending, "no tool call pending");
  const std::uint64_t ticket = jobs_.front().ticket;
  const std::uint64_t epoch = epoch_;
  const auto ready = [&] { return stop_ || epoch_ != epoch || jobs_.front().result.has_value(); };
  if (timeout) {
    if (!done_cv_.wait_for(lk, *timeout, ready)) {
      fail(Errc::kNotReady,
           fmt::format("ticket {} not ready after {} ms", ticket, timeout->count()));
    }
  } else {
    done_cv_.wait(lk, ready);
  }
  if (stop_ || epoch_ != epoch) fail(Errc::kNothingPending, "tool queue was reset");
  ToolResult r = std::move(*jobs_.front().result);
  jobs_.pop_front();
  return r;
}

std::size_t ToolQueue::pending() const {
  std::lock_guard lk(mu_);
  return jobs_.size();
}

std::uint64_t ToolQueue::next_ticket() const {
  std::lock_guard lk(mu_);
  return next_ticket_;
}

void ToolQueue::reset() {
  {
    std::lock_guard lk(mu_);
    jobs_.clear();
    delays_.clear();
    next_ticket_ = 1;
    ++epoch_;
  }
  work_cv_.notify_all();
  done_cv_.notify_all();
}

void ToolQueue::run() {
  std::uint64_t last_started = 0;
  std::uint64_t seen_epoch = 0;
  std::unique_lock lk(mu_);
  for (;;) {
    Job* next = nullptr;
    work_cv_.wait(lk, [&] {
      if (stop_) return true;
      if (seen_epoch != epoch_) {
        seen_epoch = epoch_;
        last_started = 0;
      }
      for (auto& j : jobs_) {
        if (j.ticket > last_started) {
          next = &j;
          return true;
        }
      }
      return false;
    });
    if (stop_) return;
    const std::uint64_t ticket = next->ticket;
    const std::string tool = next->tool;
    const Bytes args = next->args;
    const ToolFn fn = tools_.at(tool);
    const auto dit = delays_.find(tool);
    const double delay = dit == delays_.end() ? 0.0 : dit->second;
    const std::uint64_t epoch = epoch_;
    last_started = ticket;

    ToolResult r;
    r.ticket = ticket;
    r.tool = tool;
    r.start_us = now_us();
    if (delay > 0.0) {
      work_cv_.wait_for(lk, std::chrono::duration<double>(delay),
                        [&] { return stop_ || epoch_ != epoch; });
      if (stop_) return;
      if (epoch_ != epoch) continue;
    }
    lk.unlock();
    try {
      r.payload = fn(args);
      r.status = wire::ToolStatus::kDone;
    } catch (const std::exception& e) {
      const std::string msg = e.what();
      r.payload.assign(msg.begin(), msg.end());
      r.status = wire::ToolStatus::kFailed;
    }
    r.end_us = now_us();
    lk.lock();
    if (stop_) return;
    if (epoch_ != epoch) continue;
    for (auto& j : jobs_) {
      if (j.ticket == ticket) {
        j.result = r;
        break;
      }
    }
    if (trace_) {
      trace_->record(TraceEvent{r.start_us, r.end_us, Device::kTool, TraceKind::kToolExec, 0,
                                static_cast<std::uint32_t>(ticket),
                                fmt::format("{} #{}", tool, ticket)});
    }
    done_cv_.notify_all();
  }
}

}  // namespace edgepipe
