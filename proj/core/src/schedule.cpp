// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/schedule.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

#include "edgepipe/error.hpp"

namespace edgepipe {

const char* device_name(Device d) noexcept {
  switch (d) {
    case Device::kStage0: return "stage0";
    case Device::kStage1: return "stage1";
    case Device::kTool: return "tool";
    case Device::kAgent: return "agent";
  }
  return "?";
}

const char* slot_action_name(SlotAction a) noexcept {
  switch (a) {
    case SlotAction::kForward: return "Forward";
    case SlotAction::kBackward: return "Backward";
    case SlotAction::kFwdBwd: return "FwdBwd";
    case SlotAction::kSend: return "Send";
    case SlotAction::kRecv: return "Recv";
    case SlotAction::kStep: return "Step";
  }
  return "?";
}

std::string ScheduleSlot::label() const {
  switch (action) {
    case SlotAction::kForward: return fmt::format("F{}", microbatch);
    case SlotAction::kBackward: return fmt::format("B{}", microbatch);
    case SlotAction::kFwdBwd: return fmt::format("FB{}", microbatch);
    case SlotAction::kSend: return fmt::format("Send{}", microbatch);
    case SlotAction::kRecv: return fmt::format("Recv{}", microbatch);
    case SlotAction::kStep: return "Step";
  }
  return "?";
}

std::size_t PipelineSchedule::count(Device d, SlotAction a) const {
  return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [&](const auto& s) {
    return s.device == d && s.action == a;
  }));
}

PipelineSchedule build_schedule(std::size_t m) {
  if (m == 0) fail(Errc::kInvalidArgument, "microbatch count must be >= 1");
  PipelineSchedule sch;
  sch.microbatches = m;
  std::vector<std::size_t> fwd(m + 1), send(m + 1), fb(m + 1), recv(m + 1), bwd(m + 1);
  const auto add = [&](Device d, SlotAction a, std::size_t mb, std::vector<std::size_t> deps) {
    sch.slots.push_back({d, a, mb, std::move(deps)});
    return sch.slots.size() - 1;
  };
  for (std::size_t i = 1; i <= m; ++i) {
    fwd[i] = add(Device::kStage0, SlotAction::kForward, i,
                 i > 1 ? std::vector<std::size_t>{fwd[i - 1]} : std::vector<std::size_t>{});
    send[i] = add(Device::kStage0, SlotAction::kSend, i,
                  i > 1 ? std::vector<std::size_t>{fwd[i], send[i - 1]}
                        : std::vector<std::size_t>{fwd[i]});
  }
  for (std::size_t i = 1; i <= m; ++i) {
    fb[i] = add(Device::kStage1, SlotAction::kFwdBwd, i,
                i > 1 ? std::vector<std::size_t>{send[i], fb[i - 1]}
                      : std::vector<std::size_t>{send[i]});
    recv[i] = add(Device::kStage1, SlotAction::kRecv, i,
                  i > 1 ? std::vector<std::size_t>{fb[i], recv[i - 1]}
                        : std::vector<std::size_t>{fb[i]});
  }
  for (std::size_t i = 1; i <= m; ++i) {
    // Stage 0 finishes its forwards before the first backward.
    bwd[i] = add(Device::kStage0, SlotAction::kBackward, i,
                 {recv[i], i > 1 ? bwd[i - 1] : fwd[m]});
  }
  add(Device::kStage0, SlotAction::kStep, 0, {bwd[m], fb[m]});
  return sch;
}

namespace {

enum Lane { kLane0, kLane1, kLinkUp, kLinkDown, kLaneCount };

Lane lane_of(const ScheduleSlot& s) {
  switch (s.action) {
    case SlotAction::kSend: return kLinkUp;
    case SlotAction::kRecv: return kLinkDown;
    default: return s.device == Device::kStage1 ? kLane1 : kLane0;
  }
}

double duration_of(const ScheduleSlot& s, const SlotDurations& d) {
  switch (s.action) {
    case SlotAction::kForward: return d.forward;
    case SlotAction::kBackward: return d.backward;
    case SlotAction::kFwdBwd: return d.fwdbwd;
    case SlotAction::kSend: return d.send;
    case SlotAction::kRecv: return d.recv;
    case SlotAction::kStep: return d.step;
  }
  return 0.0;
}

}  // namespace

Simulation simulate(const PipelineSchedule& schedule, const SlotDurations& d) {
  Simulation sim;
  sim.timeline.resize(schedule.slots.size());
  std::array<double, kLaneCount> lane_free{};
  // Slots are listed so that every dependency and every lane predecessor
  // precedes its dependents; list scheduling in that order is exact.
  for (std::size_t i = 0; i < schedule.slots.size(); ++i) {
    const ScheduleSlot& s = schedule.slots[i];
    double start = lane_free[lane_of(s)];
    for (std::size_t dep : s.deps) {
      if (dep >= i) fail(Errc::kInvalidArgument, "schedule lists a slot before its dependency");
      start = std::max(start, sim.timeline[dep].end);
    }
    const double end = start + duration_of(s, d);
    sim.timeline[i] = {i, start, end};
    lane_free[lane_of(s)] = end;
    sim.makespan = std::max(sim.makespan, end);
    if (lane_of(s) == kLane0) sim.busy_stage0 += end - start;
    if (lane_of(s) == kLane1) sim.busy_stage1 += end - start;
  }
  return sim;
}

double serial_makespan(std::size_t microbatches, const SlotDurations& d) {
  return static_cast<double>(microbatches) * (d.forward + d.backward + d.fwdbwd) + d.step;
}

}  // namespace edgepipe
