// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "edgepipe/error.hpp"
#include "edgepipe/model_graph.hpp"

namespace edgepipe {

std::string format_fixed(double v, int decimals) {
  // fmt rounds the exact binary value; values like x.xx5 that are stored just
  // below the tie would round down, so round in decimal first.
  const double scale = std::pow(10.0, decimals);
  const double r = std::round(v * scale) / scale;
  return fmt::format("{:.{}f}", r, decimals);
}

std::string RunSummary::avg_text() const { return format_fixed(avg_ms, 2); }
std::string RunSummary::total_text() const { return format_fixed(total_s, 2); }

RunSummary summarize_series(const std::string& name, const std::vector<double>& batch_ms) {
  if (batch_ms.empty()) fail(Errc::kInvalidArgument, fmt::format("series '{}' is empty", name));
  RunSummary s;
  s.name = name;
  s.batch_ms = batch_ms;
  const double sum = std::accumulate(batch_ms.begin(), batch_ms.end(), 0.0);
  s.avg_ms = sum / static_cast<double>(batch_ms.size());
  s.total_s = sum / 1000.0;
  return s;
}

namespace {

bool is_compute(TraceKind k) {
  return k != TraceKind::kSend && k != TraceKind::kRecv && k != TraceKind::kRetrieveWait;
}

// Total length of the union of [start, end) intervals.
double union_seconds(std::vector<std::pair<std::int64_t, std::int64_t>> iv) {
  std::sort(iv.begin(), iv.end());
  std::int64_t total = 0, cur_s = 0, cur_e = 0;
  bool open = false;
  for (auto [a, b] : iv) {
    if (!open || a > cur_e) {
      if (open) total += cur_e - cur_s;
      cur_s = a;
      cur_e = b;
      open = true;
    } else {
      cur_e = std::max(cur_e, b);
    }
  }
  if (open) total += cur_e - cur_s;
  return static_cast<double>(total) / 1e6;
}

}  // namespace

RunSummary summarize_trace(const std::string& name, const std::vector<TraceEvent>& events) {
  std::map<std::uint32_t, std::pair<std::int64_t, std::int64_t>> batches;
  for (const auto& e : events) {
    if (e.device != Device::kStage0 && e.device != Device::kStage1) continue;
    auto [it, fresh] = batches.try_emplace(e.batch, e.t_start, e.t_end);
    if (!fresh) {
      it->second.first = std::min(it->second.first, e.t_start);
      it->second.second = std::max(it->second.second, e.t_end);
    }
  }
  if (batches.empty()) fail(Errc::kInvalidArgument, "trace holds no pipeline batches");
  std::vector<double> ms;
  for (const auto& [b, span] : batches) {
    ms.push_back(static_cast<double>(span.second - span.first) / 1000.0);
  }
  RunSummary s = summarize_series(name, ms);
  std::map<std::string, std::vector<std::pair<std::int64_t, std::int64_t>>> busy;
  for (const auto& e : events) {
    if (is_compute(e.kind) && (e.device == Device::kStage0 || e.device == Device::kStage1)) {
      busy[device_name(e.device)].emplace_back(e.t_start, e.t_end);
    }
  }
  for (auto& [dev, iv] : busy) {
    DeviceTime t;
    t.busy_s = union_seconds(iv);
    t.idle_s = std::max(0.0, s.total_s - t.busy_s);
    s.devices[dev] = t;
  }
  return s;
}

double percent_decrease(const RunSummary& baseline, const RunSummary& run) {
  if (baseline.batch_ms.size() != run.batch_ms.size()) {
    fail(Errc::kConfigMismatch,
         fmt::format("cannot compare '{}' ({} batches) with '{}' ({} batches)", run.name,
                     run.batch_ms.size(), baseline.name, baseline.batch_ms.size()));
  }
  if (!baseline.config.empty() && !run.config.empty() && baseline.config != run.config) {
    fail(Errc::kConfigMismatch, fmt::format("cannot compare '{}' [{}] with '{}' [{}]", run.name,
                                            run.config, baseline.name, baseline.config));
  }
  if (!(baseline.avg_ms > 0.0)) fail(Errc::kInvalidArgument, "baseline average must be > 0");
  return (baseline.avg_ms - run.avg_ms) / baseline.avg_ms * 100.0;
}

std::vector<std::pair<std::string, std::vector<double>>> load_raw_series(
    const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<std::pair<std::string, std::vector<double>>> out;
  try {
    const auto j = nlohmann::ordered_json::parse(text);
    if (!j.is_object()) fail(Errc::kParse, "raw series file must hold a JSON object");
    for (const auto& [name, values] : j.items()) {
      out.emplace_back(name, values.get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kParse, fmt::format("{}: {}", path.string(), e.what()));
  }
  return out;
}

std::string format_summary_table(const std::vector<RunSummary>& rows) {
  std::string s = fmt::format("{:<18} {:>7} {:>12} {:>10} {:>9}\n", "series", "batches",
                              "avg_ms", "total_s", "decrease");
  for (const auto& r : rows) {
    const std::string dec =
        r.percent_decrease ? fmt::format("{:.0f}%", *r.percent_decrease) : std::string("-");
    s += fmt::format("{:<18} {:>7} {:>12} {:>10} {:>9}\n", r.name, r.batch_ms.size(),
                     r.avg_text(), r.total_text(), dec);
    for (const auto& [dev, t] : r.devices) {
      s += fmt::format("  {:<16} busy {:>9.3f} s  idle {:>9.3f} s\n", dev, t.busy_s, t.idle_s);
    }
  }
  return s;
}

std::string format_summary_json(const RunSummary& r) {
  nlohmann::ordered_json j;
  j["series"] = r.name;
  j["batches"] = r.batch_ms.size();
  j["avg_ms"] = r.avg_ms;
  j["avg_ms_2dp"] = r.avg_text();
  j["total_s"] = r.total_s;
  if (r.percent_decrease) j["percent_decrease"] = *r.percent_decrease;
  for (const auto& [dev, t] : r.devices) {
    j["devices"][dev] = {{"busy_s", t.busy_s}, {"idle_s", t.idle_s}};
  }
  return j.dump();
}

}  // namespace edgepipe
