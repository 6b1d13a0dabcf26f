// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "edgepipe/error.hpp"

namespace edgepipe {

enum class DType : std::uint8_t { kF32, kF64, kI32, kI64, kU8 };

constexpr std::size_t dtype_width(DType t) noexcept {
  switch (t) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kI32: return 4;
    case DType::kI64: return 8;
    case DType::kU8: return 1;
  }
  return 0;
}

const char* dtype_name(DType t) noexcept;

template <typename T>
struct dtype_of;
template <> struct dtype_of<float> { static constexpr DType value = DType::kF32; };
template <> struct dtype_of<double> { static constexpr DType value = DType::kF64; };
template <> struct dtype_of<std::int32_t> { static constexpr DType value = DType::kI32; };
template <> struct dtype_of<std::int64_t> { static constexpr DType value = DType::kI64; };
template <> struct dtype_of<std::uint8_t> { static constexpr DType value = DType::kU8; };

template <typename T>
inline constexpr DType dtype_of_v = dtype_of<T>::value;

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

// Dense row-major tensor. Value semantics; the element storage is a typed
// vector selected by dtype.
class Tensor {
 public:
  Tensor() : Tensor(DType::kF32, Shape{}) {}
  Tensor(DType dtype, Shape shape);

  template <typename T>
  static Tensor from(Shape shape, std::vector<T> values) {
    if (values.size() != shape_numel(shape)) {
      fail(Errc::kShapeMismatch, "value count " + std::to_string(values.size()) +
                                     " does not match shape " + shape_str(shape));
    }
    Tensor t;
    t.dtype_ = dtype_of_v<T>;
    t.shape_ = std::move(shape);
    t.storage_ = std::move(values);
    return t;
  }

  template <typename T>
  static Tensor scalar(T value) {
    return from<T>(Shape{}, std::vector<T>{value});
  }

  DType dtype() const noexcept { return dtype_; }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const noexcept { return shape_numel(shape_); }
  std::size_t byte_size() const noexcept { return numel() * dtype_width(dtype_); }

  template <typename T>
  std::span<const T> values() const {
    check_type(dtype_of_v<T>);
    return std::get<std::vector<T>>(storage_);
  }

  template <typename T>
  std::span<T> mutable_values() {
    check_type(dtype_of_v<T>);
    return std::get<std::vector<T>>(storage_);
  }

  // Raw little-endian-on-this-host view of the elements.
  std::span<const std::uint8_t> raw_bytes() const noexcept;
  std::span<std::uint8_t> raw_bytes_mut() noexcept;

  // Same shape, same element values, interpretation of the data unchanged.
  Tensor reshaped(Shape shape) const;

  // Elements [begin, end) along axis 0.
  Tensor slice_rows(std::size_t begin, std::size_t end) const;

  // Converts floating tensors between F32 and F64; identity for same dtype.
  Tensor cast(DType to) const;

  // Same dtype, same shape, identical bytes.
  bool bit_equal(const Tensor& other) const noexcept;

  // Element `i` converted to double, any dtype.
  double at_as_double(std::size_t i) const;

 private:
  void check_type(DType want) const {
    if (want != dtype_) {
      fail(Errc::kInvalidArgument, std::string("tensor holds ") + dtype_name(dtype_) +
                                       ", accessed as " + dtype_name(want));
    }
  }

  using Storage = std::variant<std::vector<float>, std::vector<double>, std::vector<std::int32_t>,
                               std::vector<std::int64_t>, std::vector<std::uint8_t>>;

  DType dtype_;
  Shape shape_;
  Storage storage_;
};

// Concatenate along axis 0; all parts share dtype and trailing shape.
Tensor concat_rows(std::span<const Tensor> parts);

// Invoke `fn.template operator()<T>()` with T the floating type of `dtype`.
template <typename Fn>
decltype(auto) dispatch_float(DType dtype, Fn&& fn) {
  switch (dtype) {
    case DType::kF32: return fn.template operator()<float>();
    case DType::kF64: return fn.template operator()<double>();
    default: break;
  }
  fail(Errc::kInvalidArgument, std::string("floating dtype required, got ") + dtype_name(dtype));
}

}  // namespace edgepipe
