// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/prng.hpp"

#include <cmath>
#include <numbers>

namespace edgepipe {

namespace {
constexpr std::uint64_t kGamma = 0x9E37'79B9'7F4A'7C15ULL;
}

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xBF58'476D'1CE4'E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D0'49BB'1331'11EBULL;
  return x ^ (x >> 31);
}

Prng::Prng(std::uint64_t seed) noexcept : key_(mix64(seed + kGamma)) {}

Prng Prng::for_stream(std::uint64_t global_seed, std::uint64_t batch, std::uint64_t microbatch,
                      std::uint64_t layer) noexcept {
  std::uint64_t k = mix64(global_seed + kGamma);
  k = mix64(k ^ (batch + 1 * kGamma));
  k = mix64(k ^ (microbatch + 2 * kGamma));
  k = mix64(k ^ (layer + 3 * kGamma));
  Prng p(0);
  p.key_ = k;
  return p;
}

std::uint64_t Prng::next_u64() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double Prng::next_unit() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Prng::next_uniform(double lo, double hi) noexcept { return lo + (hi - lo) * next_unit(); }

double Prng::next_normal() noexcept {
  double u1 = next_unit();
  const double u2 = next_unit();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace edgepipe
