// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace edgepipe {

// Every failure raised by the library carries one of these codes so callers
// (and tests) can tell error families apart without string matching.
enum class Errc : std::uint16_t {
  kInvalidArgument = 1,
  kShapeMismatch,
  kParse,
  kNoLegalCut,
  kMissingWeight,
  // wire
  kProtocol,
  kUnknownDType,
  kTruncatedHeader,
  kTruncatedPayload,
  kDimensionOverflow,
  kOversize,
  kTransport,
  kVersionMismatch,
  kRoleConflict,
  // worker / host
  kNoPartition,
  kNoGrads,
  kTooLarge,
  kNanLoss,
  kConfigMismatch,
  kRemote,
  // tools
  kUnknownTool,
  kQueueFull,
  kNothingPending,
  kNotReady,
  kIo,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

}  // namespace edgepipe
