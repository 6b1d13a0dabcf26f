// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "edgepipe/bytes.hpp"
#include "edgepipe/tensor.hpp"

// Binary framing for tensors, control and tool messages.
//
// Tensor encoding:   dtype u8 | ndims u8 | dims u32 x ndims | raw values
// Frame envelope:    kind u8  | payload length u64 | payload
//
// Every integer and every element is little-endian. See docs/protocol.md for
// the payload of each frame kind.
namespace edgepipe::wire {

enum class FrameKind : std::uint8_t {
  kTensor = 0x01,
  kHello = 0x02,
  kLoadPartition = 0x03,
  kFwdReq = 0x04,
  kFwdBwdReq = 0x05,
  kGradResp = 0x06,
  kStep = 0x07,
  kFetchWeights = 0x08,
  kWeightsResp = 0x09,
  kToolBegin = 0x0A,
  kToolRetrieve = 0x0B,
  kToolResult = 0x0C,
  kThermalReport = 0x0D,
  kShutdown = 0x0E,
  kError = 0x0F,
};

bool is_known_kind(std::uint8_t code) noexcept;
const char* frame_kind_name(FrameKind kind) noexcept;

std::uint8_t dtype_code(DType t) noexcept;
// Throws kUnknownDType naming the byte.
DType dtype_from_code(std::uint8_t code);

inline constexpr std::size_t kFrameHeaderBytes = 9;
inline constexpr std::uint64_t kDefaultMaxPayload = 1ULL << 30;

struct Frame {
  FrameKind kind = FrameKind::kShutdown;
  Bytes payload;

  bool operator==(const Frame&) const = default;
};

// ---- tensor codec ---------------------------------------------------------

void encode_tensor(ByteWriter& out, const Tensor& t);
Bytes encode_tensor(const Tensor& t);

// Consumes exactly one encoding. On any error the reader position is left
// where it was and no tensor is produced. Header truncation (dtype, ndims,
// dims) and payload truncation raise distinct codes.
Tensor decode_tensor(ByteReader& in);
// Whole buffer must be one encoding.
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

// ---- frame codec ----------------------------------------------------------

Bytes encode_frame(const Frame& frame);
// Buffer-level inverse of encode_frame; used for golden vectors and tests.
Frame decode_frame(ByteReader& in, std::uint64_t max_payload = kDefaultMaxPayload);

Frame tensor_frame(const Tensor& t);

// ---- connection -----------------------------------------------------------

// Full-duplex frame stream over a connected socket. One reader; any number of
// writers, serialized per frame.
class Connection {
 public:
  explicit Connection(int fd, std::uint64_t max_payload = kDefaultMaxPayload);
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  // Two ends of a local stream socket pair.
  static std::pair<std::unique_ptr<Connection>, std::unique_ptr<Connection>> socket_pair();

  void write_frame(const Frame& frame);
  // Raw bytes in one locked write (golden-vector and fault-injection tests).
  void write_raw(std::span<const std::uint8_t> bytes);
  // `header_at_us`, when given, receives the steady-clock time (µs) at which
  // the frame header had fully arrived.
  Frame read_frame(std::int64_t* header_at_us = nullptr);

  // Wakes a blocked reader; further I/O fails with kTransport.
  void shutdown() noexcept;

  std::uint64_t max_payload() const noexcept { return max_payload_; }
  std::uint64_t bytes_written() const noexcept { return bytes_written_; }

 private:
  void send_all(const std::uint8_t* data, std::size_t n);
  bool recv_all(std::uint8_t* data, std::size_t n, bool eof_ok);

  int fd_;
  std::uint64_t max_payload_;
  std::mutex write_mu_;
  std::uint64_t bytes_written_ = 0;
};

// ---- session --------------------------------------------------------------

enum class Role : std::uint8_t { kHost = 0, kWorker = 1 };
const char* role_name(Role r) noexcept;

struct ProtocolVersion {
  std::uint16_t major = 1;
  std::uint16_t minor = 0;
};

inline constexpr ProtocolVersion kProtocolVersion{1, 0};

struct Session {
  Role local = Role::kHost;
  Role peer = Role::kWorker;
  ProtocolVersion peer_version;
};

// Sends HELLO, reads the peer's HELLO. Throws kVersionMismatch on differing
// major versions and kRoleConflict when both ends claim the same role.
Session handshake(Connection& conn, Role role, ProtocolVersion version = kProtocolVersion);

}  // namespace edgepipe::wire
