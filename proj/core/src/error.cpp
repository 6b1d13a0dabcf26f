// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/error.hpp"

namespace edgepipe {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::kInvalidArgument: return "invalid-argument";
    case Errc::kShapeMismatch: return "shape-mismatch";
    case Errc::kParse: return "parse";
    case Errc::kNoLegalCut: return "no-legal-cut";
    case Errc::kMissingWeight: return "missing-weight";
    case Errc::kProtocol: return "protocol";
    case Errc::kUnknownDType: return "unknown-dtype";
    case Errc::kTruncatedHeader: return "truncated-header";
    case Errc::kTruncatedPayload: return "truncated-payload";
    case Errc::kDimensionOverflow: return "dimension-overflow";
    case Errc::kOversize: return "oversize";
    case Errc::kTransport: return "transport";
    case Errc::kVersionMismatch: return "version-mismatch";
    case Errc::kRoleConflict: return "role-conflict";
    case Errc::kNoPartition: return "no-partition";
    case Errc::kNoGrads: return "no-grads";
    case Errc::kTooLarge: return "too-large";
    case Errc::kNanLoss: return "nan-loss";
    case Errc::kConfigMismatch: return "config-mismatch";
    case Errc::kRemote: return "remote";
    case Errc::kUnknownTool: return "unknown-tool";
    case Errc::kQueueFull: return "queue-full";
    case Errc::kNothingPending: return "nothing-pending";
    case Errc::kNotReady: return "not-ready";
    case Errc::kIo: return "io";
  }
  return "unknown";
}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace edgepipe
