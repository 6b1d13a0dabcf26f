// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace edgepipe {

enum class Device : std::uint8_t { kStage0, kStage1, kTool, kAgent };
const char* device_name(Device d) noexcept;

enum class SlotAction : std::uint8_t { kForward, kBackward, kFwdBwd, kSend, kRecv, kStep };
const char* slot_action_name(SlotAction a) noexcept;

struct ScheduleSlot {
  Device device = Device::kStage0;
  SlotAction action = SlotAction::kForward;
  std::size_t microbatch = 0;        // 1-based; 0 for Step
  std::vector<std::size_t> deps;     // indices of slots that must finish first

  std::string label() const;         // e.g. "F3", "FB1", "Send2", "Step"
};

// Two-stage hybrid schedule. Stage 0 runs its forwards back to back, stage 1
// runs one unified forward+backward per microbatch as activations arrive, and
// stage 0 runs each backward once its gradient is back. Slots are listed in a
// valid execution order.
struct PipelineSchedule {
  std::size_t microbatches = 0;
  std::vector<ScheduleSlot> slots;

  std::size_t count(Device d, SlotAction a) const;
};

PipelineSchedule build_schedule(std::size_t microbatches);

struct SlotDurations {
  double forward = 0.0;   // stage 0, per microbatch
  double backward = 0.0;  // stage 0, per microbatch
  double fwdbwd = 0.0;    // stage 1, per microbatch
  double send = 0.0;      // activation transfer incl. latency
  double recv = 0.0;      // gradient transfer incl. latency
  double step = 0.0;
};

struct TimedSlot {
  std::size_t slot = 0;
  double start = 0.0;
  double end = 0.0;
};

struct Simulation {
  std::vector<TimedSlot> timeline;  // same order as schedule.slots
  double makespan = 0.0;
  double busy_stage0 = 0.0;
  double busy_stage1 = 0.0;
};

// Discrete-event run of the dependency set. Compute slots occupy their
// device; sends and receives occupy one link lane per direction.
Simulation simulate(const PipelineSchedule& schedule, const SlotDurations& d);

// Single-device reference: M × (stage-0 + stage-1 work).
double serial_makespan(std::size_t microbatches, const SlotDurations& d);

}  // namespace edgepipe
