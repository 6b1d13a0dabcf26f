// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>

namespace edgepipe {

// Counter-based generator: the i-th output is a pure function of (key, i), so
// host and worker derive the same stream for a given
// (global_seed, batch, microbatch, layer_index) without sharing state.
class Prng {
 public:
  // Reserved `layer` values for streams that are not tied to a layer.
  static constexpr std::uint64_t kInitStream = 0xFFFF'FFFF'0000'0001ULL;
  static constexpr std::uint64_t kDataStream = 0xFFFF'FFFF'0000'0002ULL;

  explicit Prng(std::uint64_t seed) noexcept;

  static Prng for_stream(std::uint64_t global_seed, std::uint64_t batch, std::uint64_t microbatch,
                         std::uint64_t layer) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 random bits.
  double next_unit() noexcept;
  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) noexcept;
  // Standard normal via Box-Muller (consumes two outputs).
  double next_normal() noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace edgepipe
