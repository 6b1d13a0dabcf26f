// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/messages.hpp"

#include <fmt/format.h>

namespace edgepipe::wire {

namespace {

ByteReader reader_for(const Frame& f, FrameKind want) {
  if (f.kind != want) {
    fail(Errc::kProtocol, fmt::format("expected {} payload, got {}", frame_kind_name(want),
                                      frame_kind_name(f.kind)));
  }
  return ByteReader(f.payload);
}

}  // namespace

Frame ErrorMsg::frame() const {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(static_cast<std::uint16_t>(code) | (tool ? kToolLaneBit : 0)));
  w.long_str(message);
  return {FrameKind::kError, w.take()};
}

ErrorMsg ErrorMsg::parse(const Frame& f) {
  auto r = reader_for(f, FrameKind::kError);
  ErrorMsg m;
  const auto raw = r.u16();
  m.tool = (raw & kToolLaneBit) != 0;
  const auto code = static_cast<std::uint16_t>(raw & ~kToolLaneBit);
  if (code < static_cast<std::uint16_t>(Errc::kInvalidArgument) ||
      code > static_cast<std::uint16_t>(Errc::kIo)) {
    fail(Errc::kProtocol, fmt::format("unknown error code {}", code));
  }
  m.code = static_cast<Errc>(code);
  m.message = r.long_str();
  r.expect_end("ERROR");
  return m;
}

void ErrorMsg::raise() const { fail(code, "worker: " + message); }

Frame error_frame(const Error& e, bool tool_lane) {
  return ErrorMsg{e.code(), e.what(), tool_lane}.frame();
}

Frame FwdBwdRequest::frame() const {
  ByteWriter w;
  w.u32(batch);
  w.u32(microbatch);
  w.u64(seed);
  encode_tensor(w, activations);
  encode_tensor(w, labels);
  return {FrameKind::kFwdBwdReq, w.take()};
}

FwdBwdRequest FwdBwdRequest::parse(const Frame& f) {
  auto r = reader_for(f, FrameKind::kFwdBwdReq);
  FwdBwdRequest m;
  m.batch = r.u32();
  m.microbatch = r.u32();
  m.seed = r.u64();
  m.activations = decode_tensor(r);
  m.labels = decode_tensor(r);
  r.expect_end("FWDBWD_REQ");
  return m;
}

Frame FwdRequest::frame() const {
  ByteWriter w;
  w.u32(batch);
  w.u32(microbatch);
  w.u64(seed);
  encode_tensor(w, activations);
  return {FrameKind::kFwdReq, w.take()};
}

FwdRequest FwdRequest::parse(const Frame& f) {
  auto r = reader_for(f, FrameKind::kFwdReq);
  FwdRequest m;
  m.batch = r.u32();
  m.microbatch = r.u32();
  m.seed = r.u64();
  m.activations = decode_tensor(r);
  r.expect_end("FWD_REQ");
  return m;
}

Frame GradResponse::frame() const {
  ByteWriter w;
  w.u32(batch);
  w.u32(microbatch);
  w.i64(recv_us);
  w.i64(start_us);
  w.i64(end_us);
  encode_tensor(w, loss);
  encode_tensor(w, grad);
  return {FrameKind::kGradResp, w.take()};
}

GradResponse GradResponse::parse(const Frame& f) {
  auto r = reader_for(f, FrameKind::kGradResp);
  GradResponse m;
  m.batch = r.u32();
  m.microbatch = r.u32();
  m.recv_us = r.i64();
  m.start_us = r.i64();
  m.end_us = r.i64();
  m.loss = decode_tensor(r);
  m.grad = decode_tensor(r);
  r.expect_end("GRAD_RESP");
  return m;
}

Frame StepRequest::frame() const {
  ByteWriter w;
  w.f64(lr);
  return {FrameKind::kStep, w.take()};
}

StepRequest StepRequest::parse(const Frame& f) {
  auto r = reader_for(f, FrameKind::kStep);
  StepRequest m;
  m.lr = r.f64();
  r.expect_end("STEP");
  return m;
}

Frame WeightsResponse::frame() const {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& t : params) encode_tensor(w, t);
  return {FrameKind::kWeightsResp, w.take()};
}

WeightsResponse WeightsResponse::parse(const Frame& f) {
  auto r = reader_for(f, FrameKind::kWeightsResp);
  WeightsResponse m;
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) m.params.push_back(decode_tensor(r));
  r.expect_end("WEIGHTS_RESP");
  return m;
}

Frame ToolBeginRequest::frame() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(op));
  w.short_str(tool);
  w.long_bytes(args);
  w.f64(delay_seconds);
  return {FrameKind::kToolBegin, w.take()};
}

ToolBeginRequest ToolBeginRequest::parse(const Frame& f) {
  auto r = reader_for(f, FrameKind::kToolBegin);
  ToolBeginRequest m;
  const auto op = r.u8();
  if (op > 1) fail(Errc::kProtocol, fmt::format("unknown TOOL_BEGIN op {}", op));
  m.op = static_cast<ToolOp>(op);
  m.tool = r.short_str();
  m.args = r.long_bytes();
  m.delay_seconds = r.f64();
  r.expect_end("TOOL_BEGIN");
  return m;
}

Frame ToolBeginAck::frame() const {
  ByteWriter w;
  w.u64(ticket);
  return {FrameKind::kToolBegin, w.take()};
}

ToolBeginAck ToolBeginAck::parse(const Frame& f) {
  auto r = reader_for(f, FrameKind::kToolBegin);
  ToolBeginAck m;
  m.ticket = r.u64();
  r.expect_end("TOOL_BEGIN ack");
  return m;
}

Frame ToolRetrieveRequest::frame() const {
  ByteWriter w;
  w.u32(timeout_ms);
  return {FrameKind::kToolRetrieve, w.take()};
}

ToolRetrieveRequest ToolRetrieveRequest::parse(const Frame& f) {
  auto r = reader_for(f, FrameKind::kToolRetrieve);
  ToolRetrieveRequest m;
  m.timeout_ms = r.u32();
  r.expect_end("TOOL_RETRIEVE");
  return m;
}

Frame ToolResultMsg::frame() const {
  ByteWriter w;
  w.u64(ticket);
  w.u8(static_cast<std::uint8_t>(status));
  w.i64(start_us);
  w.i64(end_us);
  w.short_str(tool);
  w.long_bytes(payload);
  return {FrameKind::kToolResult, w.take()};
}

ToolResultMsg ToolResultMsg::parse(const Frame& f) {
  auto r = reader_for(f, FrameKind::kToolResult);
  ToolResultMsg m;
  m.ticket = r.u64();
  const auto status = r.u8();
  if (status > 1) fail(Errc::kProtocol, fmt::format("unknown tool status {}", status));
  m.status = static_cast<ToolStatus>(status);
  m.start_us = r.i64();
  m.end_us = r.i64();
  m.tool = r.short_str();
  m.payload = r.long_bytes();
  r.expect_end("TOOL_RESULT");
  return m;
}

Frame ThermalReportMsg::frame() const {
  ByteWriter w;
  w.u8(state);
  w.f64(heat);
  w.f64(throttle_factor);
  return {FrameKind::kThermalReport, w.take()};
}

ThermalReportMsg ThermalReportMsg::parse(const Frame& f) {
  auto r = reader_for(f, FrameKind::kThermalReport);
  ThermalReportMsg m;
  m.state = r.u8();
  m.heat = r.f64();
  m.throttle_factor = r.f64();
  r.expect_end("THERMAL_REPORT");
  return m;
}

Frame empty_frame(FrameKind kind) { return {kind, {}}; }

void expect_kind(const Frame& f, FrameKind want) {
  if (f.kind == want) return;
  if (f.kind == FrameKind::kError) ErrorMsg::parse(f).raise();
  fail(Errc::kProtocol, fmt::format("expected {}, got {}", frame_kind_name(want),
                                    frame_kind_name(f.kind)));
}

}  // namespace edgepipe::wire
