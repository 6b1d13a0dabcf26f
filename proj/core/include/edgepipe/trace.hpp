// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "edgepipe/schedule.hpp"

namespace edgepipe {

// Microseconds on the system monotonic clock (shared by processes on one host).
std::int64_t now_us() noexcept;

enum class TraceKind : std::uint8_t {
  kForward,
  kBackward,
  kFwdBwd,
  kSend,
  kRecv,
  kToolExec,
  kThink,
  kRetrieveWait,
  kStep,
};
// snake_case names used in the JSONL schema.
const char* trace_kind_name(TraceKind k) noexcept;
TraceKind trace_kind_from_name(std::string_view name);
Device device_from_name(std::string_view name);

struct TraceEvent {
  std::int64_t t_start = 0;  // µs
  std::int64_t t_end = 0;    // µs
  Device device = Device::kStage0;
  TraceKind kind = TraceKind::kForward;
  std::uint32_t batch = 0;
  std::uint32_t microbatch = 0;
  std::string label;

  std::int64_t duration() const noexcept { return t_end - t_start; }
  // Row in a Gantt chart: the device, plus ".send"/".recv" for link activity.
  std::string lane() const;
  bool operator==(const TraceEvent&) const = default;
};

// Thread-safe, bounded event sink. Events past capacity are dropped and
// counted rather than blocking the caller.
class TraceRecorder {
 public:
  explicit TraceRecorder(std::size_t capacity = 1 << 20) : capacity_(capacity) {}

  void record(TraceEvent e);
  std::size_t dropped() const;
  std::size_t size() const;
  // Sorted by (t_start, t_end, lane, label).
  std::vector<TraceEvent> snapshot() const;
  // Writes the sorted events as JSONL; throws kIo.
  void flush(const std::filesystem::path& path) const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<TraceEvent> events_;
  std::size_t capacity_;
  std::size_t dropped_ = 0;
};

void sort_events(std::vector<TraceEvent>& events);
std::string event_to_json(const TraceEvent& e);
TraceEvent event_from_json(std::string_view line);
void write_trace(const std::filesystem::path& path, std::vector<TraceEvent> events);
std::vector<TraceEvent> read_trace(const std::filesystem::path& path);

// Violations of t_end >= t_start or of one-event-at-a-time per lane.
std::vector<std::string> check_lane_exclusivity(const std::vector<TraceEvent>& events);

}  // namespace edgepipe
