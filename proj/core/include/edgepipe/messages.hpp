// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "edgepipe/error.hpp"
#include "edgepipe/wire.hpp"

// Payload layouts for the control and tool frames. Each struct has a `frame()`
// encoder and a static `parse()` that rejects trailing bytes.
namespace edgepipe::wire {

// ERROR: code u16 | message (u32 length, UTF-8). The low 15 bits of the code
// are the numeric value of edgepipe::Errc; bit 15 marks a reply to a tool
// request, which the host routes to the tool broker instead of compute.
inline constexpr std::uint16_t kToolLaneBit = 0x8000;

struct ErrorMsg {
  Errc code = Errc::kProtocol;
  std::string message;
  bool tool = false;

  Frame frame() const;
  static ErrorMsg parse(const Frame& f);
  bool tool_lane() const noexcept { return tool; }
  [[noreturn]] void raise() const;
};

Frame error_frame(const Error& e, bool tool_lane = false);

// FWDBWD_REQ: batch u32 | microbatch u32 | seed u64 | activations | labels
struct FwdBwdRequest {
  std::uint32_t batch = 0;
  std::uint32_t microbatch = 0;
  std::uint64_t seed = 0;
  Tensor activations;
  Tensor labels;

  Frame frame() const;
  static FwdBwdRequest parse(const Frame& f);
};

// FWD_REQ: batch u32 | microbatch u32 | seed u64 | activations. Reply: TENSOR.
struct FwdRequest {
  std::uint32_t batch = 0;
  std::uint32_t microbatch = 0;
  std::uint64_t seed = 0;
  Tensor activations;

  Frame frame() const;
  static FwdRequest parse(const Frame& f);
};

// GRAD_RESP: batch u32 | microbatch u32 | recv_us i64 | start_us i64 |
// end_us i64 | loss | grad. Timestamps are on the worker's monotonic clock.
struct GradResponse {
  std::uint32_t batch = 0;
  std::uint32_t microbatch = 0;
  std::int64_t recv_us = 0;
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  Tensor loss;
  Tensor grad;

  Frame frame() const;
  static GradResponse parse(const Frame& f);
};

// STEP: lr f64. Ack: empty STEP.
struct StepRequest {
  double lr = 0.0;

  Frame frame() const;
  static StepRequest parse(const Frame& f);
};

// WEIGHTS_RESP: count u32 | tensors, ascending layer index then parameter order.
struct WeightsResponse {
  std::vector<Tensor> params;

  Frame frame() const;
  static WeightsResponse parse(const Frame& f);
};

enum class ToolOp : std::uint8_t { kCall = 0, kSetDelay = 1 };

// TOOL_BEGIN: op u8 | tool name (u16 length) | args (u32 length) | delay f64.
// kCall enqueues and is acked with TOOL_BEGIN carrying the ticket id (u64);
// kSetDelay configures the injected delay and is acked with ticket 0.
struct ToolBeginRequest {
  ToolOp op = ToolOp::kCall;
  std::string tool;
  Bytes args;
  double delay_seconds = 0.0;

  Frame frame() const;
  static ToolBeginRequest parse(const Frame& f);
};

struct ToolBeginAck {
  std::uint64_t ticket = 0;

  Frame frame() const;
  static ToolBeginAck parse(const Frame& f);
};

inline constexpr std::uint32_t kWaitForever = std::numeric_limits<std::uint32_t>::max();

// TOOL_RETRIEVE: timeout_ms u32 (0xFFFFFFFF waits indefinitely).
struct ToolRetrieveRequest {
  std::uint32_t timeout_ms = kWaitForever;

  Frame frame() const;
  static ToolRetrieveRequest parse(const Frame& f);
};

enum class ToolStatus : std::uint8_t { kDone = 0, kFailed = 1 };

// TOOL_RESULT: ticket u64 | status u8 | start_us i64 | end_us i64 |
// tool (u16 length) | payload (u32 length). Payload is the error text when
// status is failed.
struct ToolResultMsg {
  std::uint64_t ticket = 0;
  ToolStatus status = ToolStatus::kDone;
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  std::string tool;
  Bytes payload;

  Frame frame() const;
  static ToolResultMsg parse(const Frame& f);
};

// THERMAL_REPORT request: empty. Reply: state u8 | heat f64 | throttle f64.
struct ThermalReportMsg {
  std::uint8_t state = 0;
  double heat = 0.0;
  double throttle_factor = 1.0;

  Frame frame() const;
  static ThermalReportMsg parse(const Frame& f);
};

Frame empty_frame(FrameKind kind);

// Throws kProtocol unless `f.kind == want`; an ERROR frame is re-raised with
// its own code instead.
void expect_kind(const Frame& f, FrameKind want);

}  // namespace edgepipe::wire
