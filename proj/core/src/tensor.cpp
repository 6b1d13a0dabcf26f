// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/tensor.hpp"

#include <algorithm>
#include <cstring>

namespace edgepipe {

const char* dtype_name(DType t) noexcept {
  switch (t) {
    case DType::kF32: return "f32";
    case DType::kF64: return "f64";
    case DType::kI32: return "i32";
    case DType::kI64: return "i64";
    case DType::kU8: return "u8";
  }
  return "?";
}

std::size_t shape_numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  if (shape.size() == 1) s += ",";
  return s + ")";
}

namespace {

template <typename T>
std::vector<T> zeros(std::size_t n) {
  return std::vector<T>(n, T{});
}

}  // namespace

Tensor::Tensor(DType dtype, Shape shape) : dtype_(dtype), shape_(std::move(shape)) {
  const auto n = shape_numel(shape_);
  switch (dtype) {
    case DType::kF32: storage_ = zeros<float>(n); break;
    case DType::kF64: storage_ = zeros<double>(n); break;
    case DType::kI32: storage_ = zeros<std::int32_t>(n); break;
    case DType::kI64: storage_ = zeros<std::int64_t>(n); break;
    case DType::kU8: storage_ = zeros<std::uint8_t>(n); break;
  }
}

std::span<const std::uint8_t> Tensor::raw_bytes() const noexcept {
  return std::visit(
      [](const auto& v) {
        return std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(v.data()),
                                             v.size() * sizeof(v[0]));
      },
      storage_);
}

std::span<std::uint8_t> Tensor::raw_bytes_mut() noexcept {
  return std::visit(
      [](auto& v) {
        return std::span<std::uint8_t>(reinterpret_cast<std::uint8_t*>(v.data()),
                                       v.size() * sizeof(v[0]));
      },
      storage_);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    fail(Errc::kShapeMismatch, "cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
  }
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (shape_.empty() || begin > end || end > shape_[0]) {
    fail(Errc::kShapeMismatch, "row slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                   ") out of range for " + shape_str(shape_));
  }
  Shape out_shape = shape_;
  out_shape[0] = end - begin;
  Tensor out(dtype_, out_shape);
  const std::size_t row_bytes = shape_[0] == 0 ? 0 : byte_size() / shape_[0];
  auto src = raw_bytes();
  auto dst = out.raw_bytes_mut();
  if (!dst.empty()) std::memcpy(dst.data(), src.data() + begin * row_bytes, dst.size());
  return out;
}

Tensor Tensor::cast(DType to) const {
  if (to == dtype_) return *this;
  Tensor out(to, shape_);
  if (dtype_ == DType::kF32 && to == DType::kF64) {
    auto s = values<float>();
    auto d = out.mutable_values<double>();
    std::transform(s.begin(), s.end(), d.begin(), [](float x) { return static_cast<double>(x); });
  } else if (dtype_ == DType::kF64 && to == DType::kF32) {
    auto s = values<double>();
    auto d = out.mutable_values<float>();
    std::transform(s.begin(), s.end(), d.begin(), [](double x) { return static_cast<float>(x); });
  } else {
    fail(Errc::kInvalidArgument,
         std::string("unsupported cast ") + dtype_name(dtype_) + " -> " + dtype_name(to));
  }
  return out;
}

bool Tensor::bit_equal(const Tensor& other) const noexcept {
  if (dtype_ != other.dtype_ || shape_ != other.shape_) return false;
  auto a = raw_bytes();
  auto b = other.raw_bytes();
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size()) == 0);
}

double Tensor::at_as_double(std::size_t i) const {
  return std::visit([i](const auto& v) { return static_cast<double>(v.at(i)); }, storage_);
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) fail(Errc::kInvalidArgument, "concat_rows of zero tensors");
  const auto& first = parts.front();
  if (first.rank() == 0) fail(Errc::kShapeMismatch, "concat_rows needs rank >= 1");
  Shape out_shape = first.shape();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.dtype() != first.dtype() || p.rank() != first.rank() ||
        !std::equal(p.shape().begin() + 1, p.shape().end(), first.shape().begin() + 1)) {
      fail(Errc::kShapeMismatch,
           "concat_rows parts disagree: " + shape_str(first.shape()) + " vs " + shape_str(p.shape()));
    }
    rows += p.dim(0);
  }
  out_shape[0] = rows;
  Tensor out(first.dtype(), out_shape);
  auto dst = out.raw_bytes_mut();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    auto src = p.raw_bytes();
    if (!src.empty()) std::memcpy(dst.data() + offset, src.data(), src.size());
    offset += src.size();
  }
  return out;
}

}  // namespace edgepipe
