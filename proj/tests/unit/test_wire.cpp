// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <thread>

#include "edgepipe/messages.hpp"
#include "edgepipe/prng.hpp"
#include "edgepipe/wire.hpp"
#include "support.hpp"

using namespace edgepipe;
using namespace edgepipe::wire;
using edgepipe::testing::vector_file;

namespace {

Bytes read_vector(const std::string& name) {
  std::ifstream in(vector_file(name + ".bin"), std::ios::binary);
  EXPECT_TRUE(in) << name;
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

Errc decode_error(const Bytes& b) {
  try {
    decode_tensor(std::span<const std::uint8_t>(b));
  } catch (const Error& e) {
    return e.code();
  }
  return Errc{};
}

Tensor random_tensor_any(Prng& p) {
  static constexpr DType kinds[] = {DType::kF32, DType::kF64, DType::kI32, DType::kI64, DType::kU8};
  const DType dt = kinds[p.next_u64() % 5];
  const std::size_t rank = p.next_u64() % 5;
  Shape shape(rank);
  for (auto& d : shape) d = p.next_u64() % 5;  // zero extents included
  Tensor t(dt, shape);
  auto raw = t.raw_bytes_mut();
  for (auto& b : raw) b = static_cast<std::uint8_t>(p.next_u64());  // any bit pattern, NaNs too
  return t;
}

}  // namespace

TEST(Golden, F32TwoByTwo) {
  const Bytes expect{0x01, 0x02, 0x02, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80,
                     0x3F, 0x00, 0x00, 0x00, 0x40, 0x00, 0x00, 0x40, 0x40, 0x00, 0x00, 0x80, 0x40};
  const Tensor t = Tensor::from<float>({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(encode_tensor(t), expect);
  EXPECT_EQ(read_vector("tensor_f32_2x2"), expect);
  EXPECT_TRUE(decode_tensor(std::span<const std::uint8_t>(expect)).bit_equal(t));
}

TEST(Golden, TensorFrameLengthIs26) {
  const Bytes b = read_vector("frame_tensor_f32_2x2");
  ASSERT_EQ(b.size(), 9u + 26u);
  EXPECT_EQ(b[0], 0x01);
  EXPECT_EQ(b[1], 26);
  EXPECT_EQ(encode_frame(tensor_frame(Tensor::from<float>({2, 2}, {1, 2, 3, 4}))), b);
}

TEST(Golden, TensorVectorsRoundTrip) {
  struct Case {
    const char* file;
    Tensor want;
  };
  const Case cases[] = {
      {"tensor_f32_2x2", Tensor::from<float>({2, 2}, {1, 2, 3, 4})},
      {"tensor_f64_scalar", Tensor::scalar<double>(-0.5)},
      {"tensor_i64_3", Tensor::from<std::int64_t>({3}, {-1, 0, 7})},
      {"tensor_i32_2x1", Tensor::from<std::int32_t>({2, 1}, {INT32_MIN, INT32_MAX})},
      {"tensor_u8_2x0", Tensor(DType::kU8, {2, 0})},
  };
  for (const auto& c : cases) {
    const Bytes b = read_vector(c.file);
    const Tensor t = decode_tensor(std::span<const std::uint8_t>(b));
    EXPECT_TRUE(t.bit_equal(c.want)) << c.file;
    EXPECT_EQ(encode_tensor(t), b) << c.file;
  }
}

TEST(Golden, FrameVectorsRoundTrip) {
  for (const char* name : {"frame_hello_host", "frame_step", "frame_shutdown", "frame_error_tool",
                           "frame_tool_begin", "frame_fwdbwd_req", "frame_tensor_f32_2x2"}) {
    const Bytes b = read_vector(name);
    ByteReader r(b);
    const Frame f = decode_frame(r);
    EXPECT_TRUE(r.at_end()) << name;
    EXPECT_EQ(encode_frame(f), b) << name;
  }
}

TEST(Golden, FramePayloadsDecodeToDocumentedValues) {
  auto frame_of = [](const char* name) {
    const Bytes b = read_vector(name);
    ByteReader r(b);
    return decode_frame(r);
  };
  EXPECT_EQ(StepRequest::parse(frame_of("frame_step")).lr, 0.01);
  EXPECT_EQ(frame_of("frame_shutdown").kind, FrameKind::kShutdown);

  const ErrorMsg err = ErrorMsg::parse(frame_of("frame_error_tool"));
  EXPECT_EQ(err.code, Errc::kUnknownTool);
  EXPECT_TRUE(err.tool_lane());
  EXPECT_EQ(err.message, "no tool named 'x'");
  EXPECT_EQ(encode_frame(err.frame()), read_vector("frame_error_tool"));

  const ToolBeginRequest tb = ToolBeginRequest::parse(frame_of("frame_tool_begin"));
  EXPECT_EQ(tb.op, ToolOp::kCall);
  EXPECT_EQ(tb.tool, "vector_search");
  EXPECT_EQ(tb.delay_seconds, 0.0);

  const FwdBwdRequest fb = FwdBwdRequest::parse(frame_of("frame_fwdbwd_req"));
  EXPECT_EQ(fb.batch, 3u);
  EXPECT_EQ(fb.microbatch, 1u);
  EXPECT_EQ(fb.seed, 42u);
  EXPECT_TRUE(fb.activations.bit_equal(Tensor::from<float>({1, 2}, {0.25f, -1.5f})));
  EXPECT_TRUE(fb.labels.bit_equal(Tensor::from<std::int64_t>({1}, {1})));
  EXPECT_EQ(encode_frame(fb.frame()), read_vector("frame_fwdbwd_req"));
}

TEST(Golden, BadVectorsRaiseDistinctErrors) {
  EXPECT_EQ(decode_error(read_vector("bad_unknown_dtype")), Errc::kUnknownDType);
  EXPECT_EQ(decode_error(read_vector("bad_truncated_header")), Errc::kTruncatedHeader);
  EXPECT_EQ(decode_error(read_vector("bad_truncated_payload")), Errc::kTruncatedPayload);
  try {
    decode_tensor(std::span<const std::uint8_t>(read_vector("bad_unknown_dtype")));
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("0xFF"), std::string::npos) << e.what();
  }

  const Bytes hdr = read_vector("bad_frame_truncated_header");
  ByteReader r1(hdr);
  try {
    decode_frame(r1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kTruncatedHeader);
    EXPECT_EQ(r1.position(), 0u);
  }
  const Bytes unk = read_vector("bad_frame_unknown_kind");
  ByteReader r2(unk);
  try {
    decode_frame(r2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kProtocol);
    EXPECT_TRUE(r2.at_end());  // payload skipped, stream still aligned
  }
}

TEST(TensorCodec, TruncationAtEveryLengthLeavesReaderInPlace) {
  const Bytes full = encode_tensor(Tensor::from<double>({2, 3}, {1, 2, 3, 4, 5, 6}));
  const std::size_t header = 2 + 2 * 4;
  for (std::size_t n = 0; n < full.size(); ++n) {
    const Bytes cut(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(n));
    ByteReader r(cut);
    try {
      decode_tensor(r);
      FAIL() << n;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), n < header ? Errc::kTruncatedHeader : Errc::kTruncatedPayload) << n;
      EXPECT_EQ(r.position(), 0u);
    }
  }
}

TEST(TensorCodec, TrailingBytesRejectedForWholeBuffer) {
  Bytes b = encode_tensor(Tensor::scalar<float>(1));
  b.push_back(0);
  EXPECT_EQ(decode_error(b), Errc::kProtocol);
}

TEST(TensorCodec, FuzzRoundTrip) {
  Prng p(2024);
  std::size_t failures = 0;
  for (int i = 0; i < 10000; ++i) {
    const Tensor t = random_tensor_any(p);
    const Bytes b = encode_tensor(t);
    const Tensor back = decode_tensor(std::span<const std::uint8_t>(b));
    if (!back.bit_equal(t) || encode_tensor(back) != b) ++failures;
  }
  EXPECT_EQ(failures, 0u);
}

TEST(FrameCodec, OversizeRejected) {
  const Bytes b = encode_frame(Frame{FrameKind::kStep, Bytes(100)});
  ByteReader r(b);
  try {
    decode_frame(r, 50);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kOversize);
  }
}

TEST(Messages, RoundTrips) {
  GradResponse g;
  g.batch = 4;
  g.microbatch = 7;
  g.recv_us = 1;
  g.start_us = 2;
  g.end_us = 3;
  g.loss = Tensor::scalar<float>(0.5f);
  g.grad = Tensor::from<float>({1, 2}, {1, 2});
  const GradResponse g2 = GradResponse::parse(g.frame());
  EXPECT_EQ(g2.microbatch, 7u);
  EXPECT_EQ(g2.end_us, 3);
  EXPECT_TRUE(g2.grad.bit_equal(g.grad));

  ToolResultMsg t;
  t.ticket = 9;
  t.status = ToolStatus::kFailed;
  t.tool = "x";
  t.payload = {1, 2, 3};
  const ToolResultMsg t2 = ToolResultMsg::parse(t.frame());
  EXPECT_EQ(t2.ticket, 9u);
  EXPECT_EQ(t2.status, ToolStatus::kFailed);
  EXPECT_EQ(t2.payload, t.payload);

  WeightsResponse w;
  w.params = {Tensor::scalar<float>(1), Tensor(DType::kF32, {2, 2})};
  EXPECT_EQ(WeightsResponse::parse(w.frame()).params.size(), 2u);

  ThermalReportMsg th{2, 170.5, 1.02};
  const auto th2 = ThermalReportMsg::parse(th.frame());
  EXPECT_EQ(th2.state, 2);
  EXPECT_EQ(th2.heat, 170.5);
}

TEST(Messages, WrongKindAndTrailingBytes) {
  EXPECT_THROW(StepRequest::parse(empty_frame(FrameKind::kShutdown)), Error);
  Frame f = StepRequest{0.1}.frame();
  f.payload.push_back(0);
  EXPECT_THROW(StepRequest::parse(f), Error);
}

TEST(Messages, ErrorCodeOutOfRange) {
  ByteWriter w;
  w.u16(999);
  w.long_str("x");
  EXPECT_THROW(ErrorMsg::parse(Frame{FrameKind::kError, w.take()}), Error);
}

TEST(Connection, FramesCrossASocketPair) {
  auto pair = Connection::socket_pair();
  auto& a = pair.first;
  auto& b = pair.second;
  std::thread writer([&] {
    for (int i = 0; i < 100; ++i) a->write_frame(StepRequest{static_cast<double>(i)}.frame());
    a->write_frame(empty_frame(FrameKind::kShutdown));
  });
  for (int i = 0; i < 100; ++i) {
    std::int64_t at = 0;
    const Frame f = b->read_frame(&at);
    EXPECT_EQ(StepRequest::parse(f).lr, i);
    EXPECT_GT(at, 0);
  }
  EXPECT_EQ(b->read_frame().kind, FrameKind::kShutdown);
  writer.join();
}

TEST(Connection, UnknownKindIsSkippedAndStreamContinues) {
  auto [a, b] = Connection::socket_pair();
  a->write_raw(read_vector("bad_frame_unknown_kind"));
  a->write_frame(empty_frame(FrameKind::kShutdown));
  try {
    b->read_frame();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kProtocol);
  }
  EXPECT_EQ(b->read_frame().kind, FrameKind::kShutdown);
}

TEST(Connection, PeerCloseMidFrameIsTransportError) {
  auto [a, b] = Connection::socket_pair();
  Bytes partial = encode_frame(StepRequest{1.0}.frame());
  partial.resize(12);
  a->write_raw(partial);
  a.reset();
  try {
    b->read_frame();
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == Errc::kTransport || e.code() == Errc::kTruncatedPayload) << e.what();
  }
}

TEST(Connection, OversizeFrameRejected) {
  auto [a, b] = Connection::socket_pair();
  ByteWriter w;
  w.u8(0x07);
  w.u64(kDefaultMaxPayload + 1);
  a->write_raw(w.data());
  try {
    b->read_frame();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kOversize);
  }
}

TEST(Handshake, AgreesOnRoles) {
  auto pair = Connection::socket_pair();
  auto& a = pair.first;
  auto& b = pair.second;
  Session sb;
  std::thread t([&] { sb = handshake(*b, Role::kWorker); });
  const Session sa = handshake(*a, Role::kHost);
  t.join();
  EXPECT_EQ(sa.peer, Role::kWorker);
  EXPECT_EQ(sb.peer, Role::kHost);
}

TEST(Handshake, RoleConflictAndVersionMismatch) {
  {
    auto [a, b] = Connection::socket_pair();
    std::exception_ptr other;
    std::thread t([&, &b = b] {
      try {
        handshake(*b, Role::kHost);
      } catch (...) {
        other = std::current_exception();
      }
    });
    try {
      handshake(*a, Role::kHost);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kRoleConflict);
    }
    t.join();
  }
  {
    auto [a, b] = Connection::socket_pair();
    std::thread t([&, &b = b] {
      try {
        handshake(*b, Role::kWorker, ProtocolVersion{2, 0});
      } catch (...) {
      }
    });
    try {
      handshake(*a, Role::kHost);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kVersionMismatch);
    }
    t.join();
  }
}
