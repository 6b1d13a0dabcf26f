// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/worker_client.hpp"

#include <fmt/format.h>

#include "edgepipe/error.hpp"
#include "edgepipe/net.hpp"
#include "edgepipe/trace.hpp"

namespace edgepipe {

using wire::Frame;
using wire::FrameKind;

WorkerClient::WorkerClient(std::unique_ptr<wire::Connection> conn) : conn_(std::move(conn)) {
  session_ = wire::handshake(*conn_, wire::Role::kHost);
  reader_ = std::thread([this] { read_loop(); });
}

std::unique_ptr<WorkerClient> WorkerClient::connect(const std::string& address,
                                                    std::chrono::milliseconds timeout) {
  const int fd = net::connect_to(net::parse_endpoint(address), timeout);
  return std::make_unique<WorkerClient>(std::make_unique<wire::Connection>(fd));
}

WorkerClient::~WorkerClient() {
  close();
  if (reader_.joinable()) reader_.join();
}

void WorkerClient::close() noexcept {
  {
    std::lock_guard lk(state_mu_);
    closed_ = true;
  }
  conn_->shutdown();
}

void WorkerClient::read_loop() {
  for (;;) {
    Inbound in;
    try {
      in.frame = conn_->read_frame(&in.header_us);
      in.decoded_us = now_us();
    } catch (const Error& e) {
      // An unknown kind has already been skipped; the stream is still aligned.
      if (e.code() == Errc::kProtocol) continue;
      {
        std::lock_guard lk(state_mu_);
        failure_ = std::make_exception_ptr(
            Error(Errc::kTransport, closed_ ? std::string("worker connection closed")
                                            : fmt::format("worker connection lost: {}", e.what())));
      }
      for (Inbox* box : {&compute_, &tools_}) {
        std::lock_guard lk(box->mu);
        box->cv.notify_all();
      }
      return;
    }
    bool tool = in.frame.kind == FrameKind::kToolBegin || in.frame.kind == FrameKind::kToolResult;
    if (in.frame.kind == FrameKind::kError) {
      try {
        tool = wire::ErrorMsg::parse(in.frame).tool_lane();
      } catch (const Error&) {
        tool = false;
      }
    }
    Inbox& box = tool ? tools_ : compute_;
    {
      std::lock_guard lk(box.mu);
      box.q.push_back(std::move(in));
    }
    box.cv.notify_all();
  }
}

WorkerClient::Inbound WorkerClient::take(Inbox& box) {
  std::unique_lock lk(box.mu);
  box.cv.wait(lk, [&] {
    if (!box.q.empty()) return true;
    std::lock_guard sl(state_mu_);
    return failure_ != nullptr;
  });
  if (box.q.empty()) {
    std::lock_guard sl(state_mu_);
    std::rethrow_exception(failure_);
  }
  Inbound in = std::move(box.q.front());
  box.q.pop_front();
  return in;
}

void WorkerClient::post(const Frame& request) { conn_->write_frame(request); }

WorkerClient::Inbound WorkerClient::next_compute() { return take(compute_); }

Frame WorkerClient::call(const Frame& request, FrameKind reply_kind) {
  post(request);
  Inbound in = next_compute();
  wire::expect_kind(in.frame, reply_kind);
  return std::move(in.frame);
}

void WorkerClient::load_partition(const Bytes& blob) {
  call(Frame{FrameKind::kLoadPartition, blob}, FrameKind::kLoadPartition);
}

void WorkerClient::step(double lr) { call(wire::StepRequest{lr}.frame(), FrameKind::kStep); }

std::vector<Tensor> WorkerClient::fetch_weights() {
  const Frame f = call(wire::empty_frame(FrameKind::kFetchWeights), FrameKind::kWeightsResp);
  return wire::WeightsResponse::parse(f).params;
}

wire::ThermalReportMsg WorkerClient::thermal() {
  const Frame f = call(wire::empty_frame(FrameKind::kThermalReport), FrameKind::kThermalReport);
  return wire::ThermalReportMsg::parse(f);
}

Frame WorkerClient::tool_call(const Frame& request) {
  post(request);
  Inbound in = take(tools_);
  if (in.frame.kind == FrameKind::kError) wire::ErrorMsg::parse(in.frame).raise();
  return std::move(in.frame);
}

std::uint64_t WorkerClient::tool_begin(const std::string& tool, const Bytes& args) {
  std::lock_guard lk(tool_mu_);
  wire::ToolBeginRequest req;
  req.op = wire::ToolOp::kCall;
  req.tool = tool;
  req.args = args;
  const Frame f = tool_call(req.frame());
  wire::expect_kind(f, FrameKind::kToolBegin);
  return wire::ToolBeginAck::parse(f).ticket;
}

void WorkerClient::tool_set_delay(const std::string& tool, double seconds) {
  std::lock_guard lk(tool_mu_);
  wire::ToolBeginRequest req;
  req.op = wire::ToolOp::kSetDelay;
  req.tool = tool;
  req.delay_seconds = seconds;
  const Frame f = tool_call(req.frame());
  wire::expect_kind(f, FrameKind::kToolBegin);
}

ToolResult WorkerClient::tool_retrieve(std::optional<std::chrono::milliseconds> timeout) {
  std::lock_guard lk(tool_mu_);
  wire::ToolRetrieveRequest req;
  if (timeout) {
    req.timeout_ms = static_cast<std::uint32_t>(
        std::min<std::int64_t>(timeout->count(), wire::kWaitForever - 1));
  }
  const Frame f = tool_call(req.frame());
  wire::expect_kind(f, FrameKind::kToolResult);
  return ToolResult::from_msg(wire::ToolResultMsg::parse(f));
}

void WorkerClient::shutdown_worker() {
  try {
    post(wire::empty_frame(FrameKind::kShutdown));
  } catch (const Error&) {
    // already gone
  }
  close();
}

}  // namespace edgepipe
