// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/wire.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <memory>

#include <fmt/format.h>

namespace edgepipe::wire {

bool is_known_kind(std::uint8_t code) noexcept { return code >= 0x01 && code <= 0x0F; }

const char* frame_kind_name(FrameKind kind) noexcept {
  switch (kind) {
    case FrameKind::kTensor: return "TENSOR";
    case FrameKind::kHello: return "HELLO";
    case FrameKind::kLoadPartition: return "LOAD_PARTITION";
    case FrameKind::kFwdReq: return "FWD_REQ";
    case FrameKind::kFwdBwdReq: return "FWDBWD_REQ";
    case FrameKind::kGradResp: return "GRAD_RESP";
    case FrameKind::kStep: return "STEP";
    case FrameKind::kFetchWeights: return "FETCH_WEIGHTS";
    case FrameKind::kWeightsResp: return "WEIGHTS_RESP";
    case FrameKind::kToolBegin: return "TOOL_BEGIN";
    case FrameKind::kToolRetrieve: return "TOOL_RETRIEVE";
    case FrameKind::kToolResult: return "TOOL_RESULT";
    case FrameKind::kThermalReport: return "THERMAL_REPORT";
    case FrameKind::kShutdown: return "SHUTDOWN";
    case FrameKind::kError: return "ERROR";
  }
  return "?";
}

std::uint8_t dtype_code(DType t) noexcept {
  switch (t) {
    case DType::kF32: return 0x01;
    case DType::kF64: return 0x02;
    case DType::kI32: return 0x03;
    case DType::kI64: return 0x04;
    case DType::kU8: return 0x05;
  }
  return 0;
}

DType dtype_from_code(std::uint8_t code) {
  switch (code) {
    case 0x01: return DType::kF32;
    case 0x02: return DType::kF64;
    case 0x03: return DType::kI32;
    case 0x04: return DType::kI64;
    case 0x05: return DType::kU8;
    default: break;
  }
  fail(Errc::kUnknownDType, fmt::format("unknown dtype code 0x{:02X}", code));
}

namespace {

// Elements are stored in host order; swap per element on big-endian hosts.
void append_le_elements(ByteWriter& out, const Tensor& t) {
  const auto bytes = t.raw_bytes();
  if constexpr (std::endian::native == std::endian::little) {
    out.raw(bytes);
  } else {
    const std::size_t w = dtype_width(t.dtype());
    Bytes tmp(bytes.begin(), bytes.end());
    for (std::size_t i = 0; i < tmp.size(); i += w) std::reverse(tmp.begin() + i, tmp.begin() + i + w);
    out.raw(tmp);
  }
}

void load_le_elements(Tensor& t, std::span<const std::uint8_t> src) {
  auto dst = t.raw_bytes_mut();
  if (!src.empty()) std::memcpy(dst.data(), src.data(), src.size());
  if constexpr (std::endian::native != std::endian::little) {
    const std::size_t w = dtype_width(t.dtype());
    for (std::size_t i = 0; i < dst.size(); i += w) std::reverse(dst.begin() + i, dst.begin() + i + w);
  }
}

}  // namespace

void encode_tensor(ByteWriter& out, const Tensor& t) {
  if (t.rank() > 255) {
    fail(Errc::kDimensionOverflow, fmt::format("tensor rank {} exceeds 255", t.rank()));
  }
  for (std::size_t d : t.shape()) {
    if (d > 0xFFFF'FFFFULL) {
      fail(Errc::kDimensionOverflow,
           fmt::format("dimension {} of shape {} does not fit in u32", d, shape_str(t.shape())));
    }
  }
  out.reserve(out.size() + 2 + 4 * t.rank() + t.byte_size());
  out.u8(dtype_code(t.dtype()));
  out.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) out.u32(static_cast<std::uint32_t>(d));
  append_le_elements(out, t);
}

Bytes encode_tensor(const Tensor& t) {
  ByteWriter w;
  encode_tensor(w, t);
  return w.take();
}

Tensor decode_tensor(ByteReader& in) {
  const std::size_t start = in.position();
  try {
    if (in.remaining() < 2) {
      fail(Errc::kTruncatedHeader,
           fmt::format("tensor header truncated: {} of 2 bytes", in.remaining()));
    }
    const DType dtype = dtype_from_code(in.u8());
    const std::size_t ndims = in.u8();
    if (in.remaining() < 4 * ndims) {
      fail(Errc::kTruncatedHeader, fmt::format("tensor dims truncated: {} of {} bytes",
                                               in.remaining(), 4 * ndims));
    }
    Shape shape(ndims);
    // Overflow-safe element count: reject before computing the byte length.
    unsigned __int128 numel = 1;
    for (auto& d : shape) {
      d = in.u32();
      numel *= d;
    }
    const unsigned __int128 nbytes = numel * dtype_width(dtype);
    if (nbytes > in.remaining()) {
      fail(Errc::kTruncatedPayload,
           fmt::format("tensor payload truncated: shape {} needs {} bytes, {} available",
                       shape_str(shape), static_cast<std::uint64_t>(
                           nbytes > UINT64_MAX ? UINT64_MAX : static_cast<std::uint64_t>(nbytes)),
                       in.remaining()));
    }
    Tensor t(dtype, std::move(shape));
    load_le_elements(t, in.raw(static_cast<std::size_t>(nbytes)));
    return t;
  } catch (...) {
    in.seek(start);
    throw;
  }
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  Tensor t = decode_tensor(r);
  r.expect_end("tensor encoding");
  return t;
}

Bytes encode_frame(const Frame& frame) {
  ByteWriter w;
  w.reserve(kFrameHeaderBytes + frame.payload.size());
  w.u8(static_cast<std::uint8_t>(frame.kind));
  w.u64(frame.payload.size());
  w.raw(frame.payload);
  return w.take();
}

Frame decode_frame(ByteReader& in, std::uint64_t max_payload) {
  const std::size_t start = in.position();
  try {
    if (in.remaining() < kFrameHeaderBytes) {
      fail(Errc::kTruncatedHeader,
           fmt::format("frame header truncated: {} of 9 bytes", in.remaining()));
    }
    const std::uint8_t code = in.u8();
    const std::uint64_t len = in.u64();
    if (len > max_payload) {
      fail(Errc::kOversize, fmt::format("frame payload {} bytes exceeds cap {}", len, max_payload));
    }
    if (len > in.remaining()) {
      fail(Errc::kTruncatedPayload,
           fmt::format("frame payload truncated: {} of {} bytes", in.remaining(), len));
    }
    auto body = in.raw(static_cast<std::size_t>(len));
    if (!is_known_kind(code)) {
      // The payload has been skipped, so the stream stays aligned.
      fail(Errc::kProtocol, fmt::format("unknown frame kind 0x{:02X}", code));
    }
    return Frame{static_cast<FrameKind>(code), Bytes(body.begin(), body.end())};
  } catch (const Error& e) {
    if (e.code() != Errc::kProtocol) in.seek(start);
    throw;
  }
}

Frame tensor_frame(const Tensor& t) { return Frame{FrameKind::kTensor, encode_tensor(t)}; }

// ---- Connection -------------------------------------------------------------

Connection::Connection(int fd, std::uint64_t max_payload) : fd_(fd), max_payload_(max_payload) {
  if (fd_ < 0) fail(Errc::kInvalidArgument, "connection needs an open socket");
}

Connection::~Connection() {
  if (fd_ >= 0) ::close(fd_);
}

std::pair<std::unique_ptr<Connection>, std::unique_ptr<Connection>> Connection::socket_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    fail(Errc::kTransport, fmt::format("socketpair: {}", std::strerror(errno)));
  }
  return {std::make_unique<Connection>(fds[0]), std::make_unique<Connection>(fds[1])};
}

void Connection::send_all(const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t k = ::send(fd_, data, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      fail(Errc::kTransport, fmt::format("send failed: {}", std::strerror(errno)));
    }
    data += k;
    n -= static_cast<std::size_t>(k);
    bytes_written_ += static_cast<std::uint64_t>(k);
  }
}

bool Connection::recv_all(std::uint8_t* data, std::size_t n, bool eof_ok) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t k = ::recv(fd_, data + got, n - got, 0);
    if (k < 0) {
      if (errno == EINTR) continue;
      fail(Errc::kTransport, fmt::format("recv failed: {}", std::strerror(errno)));
    }
    if (k == 0) {
      if (got == 0 && eof_ok) return false;
      fail(Errc::kTransport, "connection lost mid-frame");
    }
    got += static_cast<std::size_t>(k);
  }
  return true;
}

void Connection::write_frame(const Frame& frame) {
  std::uint8_t header[kFrameHeaderBytes];
  header[0] = static_cast<std::uint8_t>(frame.kind);
  const std::uint64_t len = frame.payload.size();
  for (int i = 0; i < 8; ++i) header[1 + i] = static_cast<std::uint8_t>(len >> (8 * i));
  std::lock_guard lock(write_mu_);
  send_all(header, sizeof header);
  send_all(frame.payload.data(), frame.payload.size());
}

void Connection::write_raw(std::span<const std::uint8_t> bytes) {
  std::lock_guard lock(write_mu_);
  send_all(bytes.data(), bytes.size());
}

Frame Connection::read_frame(std::int64_t* header_at_us) {
  std::uint8_t header[kFrameHeaderBytes];
  if (!recv_all(header, sizeof header, true)) fail(Errc::kTransport, "connection closed by peer");
  if (header_at_us) {
    *header_at_us = std::chrono::duration_cast<std::chrono::microseconds>(
                        std::chrono::steady_clock::now().time_since_epoch())
                        .count();
  }
  const std::uint8_t code = header[0];
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(header[1 + i]) << (8 * i);
  if (len > max_payload_) {
    fail(Errc::kOversize, fmt::format("frame payload {} bytes exceeds cap {}", len, max_payload_));
  }
  if (!is_known_kind(code)) {
    std::uint8_t sink[4096];
    while (len > 0) {
      const std::size_t chunk = len < sizeof sink ? static_cast<std::size_t>(len) : sizeof sink;
      recv_all(sink, chunk, false);
      len -= chunk;
    }
    fail(Errc::kProtocol, fmt::format("unknown frame kind 0x{:02X}", code));
  }
  Frame f;
  f.kind = static_cast<FrameKind>(code);
  f.payload.resize(static_cast<std::size_t>(len));
  recv_all(f.payload.data(), f.payload.size(), false);
  return f;
}

void Connection::shutdown() noexcept { ::shutdown(fd_, SHUT_RDWR); }

// ---- handshake ----------------------------------------------------------------

const char* role_name(Role r) noexcept { return r == Role::kHost ? "host" : "worker"; }

Session handshake(Connection& conn, Role role, ProtocolVersion version) {
  ByteWriter w;
  w.u16(version.major);
  w.u16(version.minor);
  w.u8(static_cast<std::uint8_t>(role));
  conn.write_frame(Frame{FrameKind::kHello, w.take()});

  const Frame reply = conn.read_frame();
  if (reply.kind != FrameKind::kHello) {
    fail(Errc::kProtocol,
         fmt::format("expected HELLO, got {}", frame_kind_name(reply.kind)));
  }
  ByteReader r(reply.payload);
  Session s;
  s.local = role;
  s.peer_version.major = r.u16();
  s.peer_version.minor = r.u16();
  const std::uint8_t peer_role = r.u8();
  r.expect_end("HELLO");
  if (peer_role > 1) fail(Errc::kProtocol, fmt::format("unknown role {}", peer_role));
  s.peer = static_cast<Role>(peer_role);
  if (s.peer_version.major != version.major) {
    fail(Errc::kVersionMismatch,
         fmt::format("protocol major version mismatch: local {}.{}, peer {}.{}", version.major,
                     version.minor, s.peer_version.major, s.peer_version.minor));
  }
  if (s.peer == role) {
    fail(Errc::kRoleConflict, fmt::format("both ends claim role {}", role_name(role)));
  }
  return s;
}

}  // namespace edgepipe::wire
