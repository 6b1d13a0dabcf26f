// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/trace.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "edgepipe/error.hpp"

namespace edgepipe {

std::int64_t now_us() noexcept {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

const char* trace_kind_name(TraceKind k) noexcept {
  switch (k) {
    case TraceKind::kForward: return "forward";
    case TraceKind::kBackward: return "backward";
    case TraceKind::kFwdBwd: return "fwd_bwd";
    case TraceKind::kSend: return "send";
    case TraceKind::kRecv: return "recv";
    case TraceKind::kToolExec: return "tool_exec";
    case TraceKind::kThink: return "think";
    case TraceKind::kRetrieveWait: return "retrieve_wait";
    case TraceKind::kStep: return "step";
  }
  return "?";
}

TraceKind trace_kind_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(TraceKind::kStep); ++i) {
    const auto k = static_cast<TraceKind>(i);
    if (name == trace_kind_name(k)) return k;
  }
  fail(Errc::kParse, fmt::format("unknown trace kind '{}'", name));
}

Device device_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(Device::kAgent); ++i) {
    const auto d = static_cast<Device>(i);
    if (name == device_name(d)) return d;
  }
  fail(Errc::kParse, fmt::format("unknown device '{}'", name));
}

std::string TraceEvent::lane() const {
  std::string l = device_name(device);
  if (kind == TraceKind::kSend) l += ".send";
  if (kind == TraceKind::kRecv) l += ".recv";
  return l;
}

void TraceRecorder::record(TraceEvent e) {
  std::lock_guard lock(mu_);
  if (events_.size() >= capacity_) {
    ++dropped_;
    return;
  }
  events_.push_back(std::move(e));
}

std::size_t TraceRecorder::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

std::size_t TraceRecorder::size() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

std::vector<TraceEvent> TraceRecorder::snapshot() const {
  std::vector<TraceEvent> copy;
  {
    std::lock_guard lock(mu_);
    copy = events_;
  }
  sort_events(copy);
  return copy;
}

void TraceRecorder::flush(const std::filesystem::path& path) const { write_trace(path, snapshot()); }

void TraceRecorder::clear() {
  std::lock_guard lock(mu_);
  events_.clear();
  dropped_ = 0;
}

void sort_events(std::vector<TraceEvent>& events) {
  std::stable_sort(events.begin(), events.end(), [](const TraceEvent& a, const TraceEvent& b) {
    return std::make_tuple(a.t_start, a.t_end, a.lane(), a.label) <
           std::make_tuple(b.t_start, b.t_end, b.lane(), b.label);
  });
}

std::string event_to_json(const TraceEvent& e) {
  nlohmann::ordered_json j;
  j["t_start"] = e.t_start;
  j["t_end"] = e.t_end;
  j["device"] = device_name(e.device);
  j["kind"] = trace_kind_name(e.kind);
  j["batch"] = e.batch;
  j["microbatch"] = e.microbatch;
  j["label"] = e.label;
  return j.dump();
}

TraceEvent event_from_json(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    TraceEvent e;
    e.t_start = j.at("t_start").get<std::int64_t>();
    e.t_end = j.at("t_end").get<std::int64_t>();
    e.device = device_from_name(j.at("device").get<std::string>());
    e.kind = trace_kind_from_name(j.at("kind").get<std::string>());
    e.batch = j.value("batch", 0U);
    e.microbatch = j.value("microbatch", 0U);
    e.label = j.value("label", std::string());
    return e;
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::kParse, fmt::format("bad trace event: {}", ex.what()));
  }
}

void write_trace(const std::filesystem::path& path, std::vector<TraceEvent> events) {
  sort_events(events);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::kIo, fmt::format("cannot write {}", path.string()));
  for (const auto& e : events) out << event_to_json(e) << '\n';
  out.flush();
  if (!out) fail(Errc::kIo, fmt::format("write to {} failed", path.string()));
}

std::vector<TraceEvent> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kIo, fmt::format("cannot open {}", path.string()));
  std::vector<TraceEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(event_from_json(line));
    } catch (const Error& e) {
      fail(Errc::kParse, fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return events;
}

std::vector<std::string> check_lane_exclusivity(const std::vector<TraceEvent>& events) {
  std::vector<std::string> problems;
  std::map<std::string, std::vector<const TraceEvent*>> lanes;
  for (const auto& e : events) {
    if (e.t_end < e.t_start) {
      problems.push_back(fmt::format("{} '{}' ends before it starts", e.lane(), e.label));
    }
    lanes[e.lane()].push_back(&e);
  }
  for (auto& [lane, evs] : lanes) {
    std::sort(evs.begin(), evs.end(), [](const TraceEvent* a, const TraceEvent* b) {
      return std::tie(a->t_start, a->t_end) < std::tie(b->t_start, b->t_end);
    });
    for (std::size_t i = 1; i < evs.size(); ++i) {
      if (evs[i]->t_start < evs[i - 1]->t_end) {
        problems.push_back(fmt::format("lane {}: '{}' [{}, {}] overlaps '{}' [{}, {}]", lane,
                                       evs[i]->label, evs[i]->t_start, evs[i]->t_end,
                                       evs[i - 1]->label, evs[i - 1]->t_start, evs[i - 1]->t_end));
      }
    }
  }
  return problems;
}

}  // namespace edgepipe
