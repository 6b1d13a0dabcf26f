// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace edgepipe {

enum class ThermalState : std::uint8_t { kMinimal = 0, kFair = 1, kSerious = 2 };
const char* thermal_state_name(ThermalState s) noexcept;

struct ThermalConfig {
  double gain = 1.0;          // heat units per busy second
  double dissipation = 1.0;   // heat units per idle second
  double fair_at = 100.0;
  double serious_at = 200.0;
  double throttle_factor = 1.05;

  void validate() const;
};

// key=value lines: gain, dissipation, fair_at, serious_at, throttle_factor.
ThermalConfig parse_thermal_config(std::string_view text);
ThermalConfig load_thermal_config(const std::filesystem::path& path);

// Single heat reservoir: heat <- max(0, heat + gain*busy - dissipation*idle).
class ThermalModel {
 public:
  explicit ThermalModel(ThermalConfig config = {});

  ThermalState advance(double busy_seconds, double idle_seconds);
  ThermalState state() const noexcept;
  double heat() const noexcept { return heat_; }
  const ThermalConfig& config() const noexcept { return config_; }
  // Multiplier for synthetic compute durations: throttle_factor when Serious.
  double compute_multiplier() const noexcept;
  void reset() noexcept { heat_ = 0.0; }

 private:
  ThermalConfig config_;
  double heat_ = 0.0;
};

struct ThermalBatch {
  std::size_t batch = 0;  // 1-based
  ThermalState state = ThermalState::kMinimal;  // reported at the end of the batch
  double heat_after = 0.0;
  double seconds = 0.0;   // busy time including any throttle
};

// Scenario file: key=value lines `batches`, `busy_seconds`, `idle_seconds`.
struct ThermalScenario {
  std::size_t batches = 30;
  double busy_seconds = 12.0;
  double idle_seconds = 1.0;
};
ThermalScenario parse_thermal_scenario(std::string_view text);

// Runs the scenario: each batch's busy time is base * multiplier of the state
// at its start; the model then advances by that busy time and the idle gap,
// and the state after the batch is reported.
std::vector<ThermalBatch> run_thermal_scenario(const ThermalConfig& config,
                                               const ThermalScenario& scenario);

}  // namespace edgepipe
