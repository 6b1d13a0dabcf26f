// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edgepipe/error.hpp"

namespace edgepipe {

using Bytes = std::vector<std::uint8_t>;

// Little-endian writer; layout is independent of the host byte order.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { put_le(v, 2); }
  void u32(std::uint32_t v) { put_le(v, 4); }
  void u64(std::uint64_t v) { put_le(v, 8); }
  void i64(std::int64_t v) { put_le(static_cast<std::uint64_t>(v), 8); }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void raw(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  // u16 length prefix
  void short_str(std::string_view s);
  // u32 length prefix
  void long_bytes(std::span<const std::uint8_t> b);
  void long_str(std::string_view s);

  std::size_t size() const noexcept { return buf_.size(); }
  const Bytes& data() const noexcept { return buf_; }
  Bytes take() noexcept { return std::move(buf_); }
  void reserve(std::size_t n) { buf_.reserve(n); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  Bytes buf_;
};

// Bounds-checked little-endian reader. Running past the end throws
// kTruncatedPayload unless the caller classifies the truncation first.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t u64() { return get_le(8); }
  std::int64_t i64() { return static_cast<std::int64_t>(get_le(8)); }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::string short_str();
  Bytes long_bytes();
  std::string long_str();

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }
  void seek(std::size_t pos) { pos_ = pos; }

  void expect_end(const char* what) const {
    if (!at_end()) {
      fail(Errc::kProtocol, std::string(what) + ": " + std::to_string(remaining()) +
                                " trailing bytes");
    }
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      fail(Errc::kTruncatedPayload, "need " + std::to_string(n) + " bytes, have " +
                                        std::to_string(remaining()));
    }
  }
  std::uint64_t get_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline void ByteWriter::short_str(std::string_view s) {
  if (s.size() > 0xFFFF) fail(Errc::kInvalidArgument, "string longer than 65535 bytes");
  u16(static_cast<std::uint16_t>(s.size()));
  raw({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

inline void ByteWriter::long_bytes(std::span<const std::uint8_t> b) {
  if (b.size() > 0xFFFF'FFFFULL) fail(Errc::kInvalidArgument, "blob longer than 4 GiB");
  u32(static_cast<std::uint32_t>(b.size()));
  raw(b);
}

inline void ByteWriter::long_str(std::string_view s) {
  long_bytes({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

inline std::string ByteReader::short_str() {
  const auto n = u16();
  auto s = raw(n);
  return {reinterpret_cast<const char*>(s.data()), s.size()};
}

inline Bytes ByteReader::long_bytes() {
  const auto n = u32();
  auto s = raw(n);
  return {s.begin(), s.end()};
}

inline std::string ByteReader::long_str() {
  const auto n = u32();
  auto s = raw(n);
  return {reinterpret_cast<const char*>(s.data()), s.size()};
}

}  // namespace edgepipe
