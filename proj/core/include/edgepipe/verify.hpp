// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edgepipe/tensor.hpp"

namespace edgepipe {

// Acceptance bound for both the max and the mean absolute difference.
inline constexpr double kVerifyBound = 1e-5;

struct DiffReport {
  std::string op_name;
  double max_abs_diff = 0.0;
  double mean_abs_diff = 0.0;
  std::size_t element_count = 0;
  bool shape_mismatch = false;
  // Fixtures that exist to be caught set this; their "fail" is the good outcome.
  bool expect_failure = false;

  bool within(double bound = kVerifyBound) const {
    return !shape_mismatch && max_abs_diff < bound && mean_abs_diff < bound;
  }
  // Merge another case of the same op: max of maxes, element-weighted mean.
  void merge(const DiffReport& other);

  // "op=<name> max=<e> mean=<e> status=<pass|fail>"
  std::string line() const;
};

using OpImpl = std::function<Tensor(std::span<const Tensor>)>;

DiffReport verify_pair(const std::string& op_name, std::span<const Tensor> inputs,
                       const OpImpl& impl_a, const OpImpl& impl_b);

// Runs every dual-implemented op on `cases` random F32 instances each, plus
// the inverse-rate dropout fixture. One aggregated report per op.
std::vector<DiffReport> run_op_verification(std::uint64_t seed, std::size_t cases);

}  // namespace edgepipe
