// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edgepipe/trace.hpp"

namespace edgepipe {

struct DeviceTime {
  double busy_s = 0.0;
  double idle_s = 0.0;
};

struct RunSummary {
  std::string name;
  std::vector<double> batch_ms;
  double avg_ms = 0.0;
  double total_s = 0.0;  // sum of per-batch times
  std::map<std::string, DeviceTime> devices;  // from traces only
  std::optional<double> percent_decrease;     // vs a baseline, exact
  // What was run (model, batch shape); compared runs must agree when set.
  std::string config;

  // Average rounded half-away-from-zero to 2 decimals, as text.
  std::string avg_text() const;
  std::string total_text() const;
};

RunSummary summarize_series(const std::string& name, const std::vector<double>& batch_ms);

// Per-batch wall time = last end - first start over the batch's events;
// busy = union of event intervals per compute lane; idle = wall - busy.
RunSummary summarize_trace(const std::string& name, const std::vector<TraceEvent>& events);

// (base_avg - new_avg) / base_avg * 100. Throws kConfigMismatch when the
// batch counts or the config keys differ.
double percent_decrease(const RunSummary& baseline, const RunSummary& run);

// JSON object of series name -> list of milliseconds, in file order.
std::vector<std::pair<std::string, std::vector<double>>> load_raw_series(
    const std::filesystem::path& path);

// Fixed-width table; decreases at integer precision.
std::string format_summary_table(const std::vector<RunSummary>& rows);
// One JSON object per row with exact values.
std::string format_summary_json(const RunSummary& row);

std::string format_fixed(double v, int decimals);

}  // namespace edgepipe
