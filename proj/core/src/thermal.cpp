// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "edgepipe/error.hpp"
#include "edgepipe/model_graph.hpp"

namespace edgepipe {

const char* thermal_state_name(ThermalState s) noexcept {
  switch (s) {
    case ThermalState::kMinimal: return "Minimal";
    case ThermalState::kFair: return "Fair";
    case ThermalState::kSerious: return "Serious";
  }
  return "?";
}

void ThermalConfig::validate() const {
  const auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(gain) || !finite_nonneg(dissipation)) {
    fail(Errc::kInvalidArgument, "thermal gain and dissipation must be finite and >= 0");
  }
  if (!(fair_at > 0.0 && fair_at < serious_at) || !std::isfinite(serious_at)) {
    fail(Errc::kInvalidArgument, "thermal thresholds need 0 < fair_at < serious_at");
  }
  if (!(throttle_factor >= 1.0) || !std::isfinite(throttle_factor)) {
    fail(Errc::kInvalidArgument, "throttle_factor must be >= 1");
  }
}

namespace {

// Parses `key=value` lines into doubles, rejecting unknown keys.
std::map<std::string, double> parse_kv(std::string_view text,
                                       std::initializer_list<const char*> keys) {
  std::map<std::string, double> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(Errc::kParse, fmt::format("line {}: expected key=value", line_no));
    auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string val = strip(line.substr(eq + 1));
    if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) ==
        keys.end()) {
      fail(Errc::kParse, fmt::format("line {}: unknown key '{}'", line_no, key));
    }
    try {
      std::size_t used = 0;
      out[key] = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      fail(Errc::kParse, fmt::format("line {}: '{}' is not a number", line_no, val));
    }
  }
  return out;
}

}  // namespace

ThermalConfig parse_thermal_config(std::string_view text) {
  const auto kv = parse_kv(text, {"gain", "dissipation", "fair_at", "serious_at", "throttle_factor"});
  ThermalConfig c;
  if (auto it = kv.find("gain"); it != kv.end()) c.gain = it->second;
  if (auto it = kv.find("dissipation"); it != kv.end()) c.dissipation = it->second;
  if (auto it = kv.find("fair_at"); it != kv.end()) c.fair_at = it->second;
  if (auto it = kv.find("serious_at"); it != kv.end()) c.serious_at = it->second;
  if (auto it = kv.find("throttle_factor"); it != kv.end()) c.throttle_factor = it->second;
  c.validate();
  return c;
}

ThermalConfig load_thermal_config(const std::filesystem::path& path) {
  return parse_thermal_config(read_text_file(path));
}

ThermalModel::ThermalModel(ThermalConfig config) : config_(config) { config_.validate(); }

ThermalState ThermalModel::advance(double busy_seconds, double idle_seconds) {
  if (!(busy_seconds >= 0.0) || !(idle_seconds >= 0.0)) {
    fail(Errc::kInvalidArgument, "thermal durations must be >= 0");
  }
  heat_ = std::max(0.0, heat_ + config_.gain * busy_seconds - config_.dissipation * idle_seconds);
  return state();
}

ThermalState ThermalModel::state() const noexcept {
  if (heat_ < config_.fair_at) return ThermalState::kMinimal;
  if (heat_ < config_.serious_at) return ThermalState::kFair;
  return ThermalState::kSerious;
}

double ThermalModel::compute_multiplier() const noexcept {
  return state() == ThermalState::kSerious ? config_.throttle_factor : 1.0;
}

ThermalScenario parse_thermal_scenario(std::string_view text) {
  const auto kv = parse_kv(text, {"batches", "busy_seconds", "idle_seconds"});
  ThermalScenario s;
  if (auto it = kv.find("batches"); it != kv.end()) {
    if (!(it->second >= 1.0) || it->second != std::floor(it->second)) {
      fail(Errc::kParse, "batches must be a positive integer");
    }
    s.batches = static_cast<std::size_t>(it->second);
  }
  if (auto it = kv.find("busy_seconds"); it != kv.end()) s.busy_seconds = it->second;
  if (auto it = kv.find("idle_seconds"); it != kv.end()) s.idle_seconds = it->second;
  if (!(s.busy_seconds >= 0.0) || !(s.idle_seconds >= 0.0)) {
    fail(Errc::kParse, "scenario durations must be >= 0");
  }
  return s;
}

std::vector<ThermalBatch> run_thermal_scenario(const ThermalConfig& config,
                                               const ThermalScenario& scenario) {
  ThermalModel model(config);
  std::vector<ThermalBatch> out;
  for (std::size_t b = 1; b <= scenario.batches; ++b) {
    ThermalBatch row;
    row.batch = b;
    row.seconds = scenario.busy_seconds * model.compute_multiplier();
    row.state = model.advance(row.seconds, scenario.idle_seconds);
    row.heat_after = model.heat();
    out.push_back(row);
  }
  return out;
}

}  // namespace edgepipe
