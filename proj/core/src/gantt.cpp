// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/gantt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

namespace edgepipe {

const char* kind_color(TraceKind k) noexcept {
  switch (k) {
    case TraceKind::kForward: return "#f5d442";       // yellow
    case TraceKind::kBackward: return "#f39c34";      // orange
    case TraceKind::kFwdBwd: return "#3fcbdc";        // cyan
    case TraceKind::kSend: return "#9aa5b1";
    case TraceKind::kRecv: return "#66727f";
    case TraceKind::kToolExec: return "#8e6cc9";
    case TraceKind::kThink: return "#6cbf6c";
    case TraceKind::kRetrieveWait: return "#d9534f";
    case TraceKind::kStep: return "#404040";
  }
  return "#000000";
}

char kind_glyph(TraceKind k) noexcept {
  switch (k) {
    case TraceKind::kForward: return 'F';
    case TraceKind::kBackward: return 'B';
    case TraceKind::kFwdBwd: return 'X';
    case TraceKind::kSend: return '>';
    case TraceKind::kRecv: return '<';
    case TraceKind::kToolExec: return 'T';
    case TraceKind::kThink: return 't';
    case TraceKind::kRetrieveWait: return 'w';
    case TraceKind::kStep: return 'S';
  }
  return '?';
}

std::vector<std::string> gantt_lanes(const std::vector<TraceEvent>& events) {
  std::set<std::string> present;
  for (const auto& e : events) present.insert(e.lane());
  std::vector<std::string> order;
  for (int d = 0; d <= static_cast<int>(Device::kAgent); ++d) {
    const std::string base = device_name(static_cast<Device>(d));
    for (const std::string suffix : {"", ".send", ".recv"}) {
      if (present.count(base + suffix)) order.push_back(base + suffix);
    }
  }
  return order;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_gantt_svg(const std::vector<TraceEvent>& events, const GanttOptions& opt) {
  const auto lanes = gantt_lanes(events);
  std::map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < lanes.size(); ++i) row[lanes[i]] = i;

  std::int64_t t0 = 0, t1 = 1;
  if (!events.empty()) {
    t0 = events.front().t_start;
    t1 = events.front().t_end;
    for (const auto& e : events) {
      t0 = std::min(t0, e.t_start);
      t1 = std::max(t1, e.t_end);
    }
    if (t1 == t0) t1 = t0 + 1;
  }
  const double left = 110.0, top = 30.0, row_h = 26.0, bar_h = 18.0;
  const double scale = opt.width_px / static_cast<double>(t1 - t0);
  const double legend_y = top + row_h * static_cast<double>(lanes.size()) + 30.0;
  const double height = legend_y + 30.0;
  const double width = left + opt.width_px + 20.0;

  std::string s;
  s += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
      "font-family=\"monospace\" font-size=\"11\">\n",
      width, height);
  s += fmt::format("<rect x=\"0\" y=\"0\" width=\"{:.0f}\" height=\"{:.0f}\" fill=\"#ffffff\"/>\n",
                   width, height);
  if (!opt.title.empty()) {
    s += fmt::format("<text x=\"{:.0f}\" y=\"18\">{}</text>\n", left, xml_escape(opt.title));
  }
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const double y = top + row_h * static_cast<double>(i);
    s += fmt::format("<text x=\"4\" y=\"{:.2f}\">{}</text>\n", y + bar_h - 5.0, lanes[i]);
    s += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#dddddd\"/>\n", left,
        y + bar_h + 3.0, left + opt.width_px, y + bar_h + 3.0);
  }
  std::vector<TraceEvent> sorted = events;
  sort_events(sorted);
  for (const auto& e : sorted) {
    const double x = left + static_cast<double>(e.t_start - t0) * scale;
    const double w = std::max(0.5, static_cast<double>(e.t_end - e.t_start) * scale);
    const double y = top + row_h * static_cast<double>(row[e.lane()]);
    s += fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\" "
        "stroke=\"#333333\" stroke-width=\"0.5\"><title>{} {} b{} mb{} {}us</title></rect>\n",
        x, y, w, bar_h, kind_color(e.kind), trace_kind_name(e.kind), xml_escape(e.label), e.batch,
        e.microbatch, e.duration());
  }
  // time axis
  s += fmt::format("<text x=\"{:.0f}\" y=\"{:.2f}\">0 ms</text>\n", left, legend_y - 12.0);
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.1f} ms</text>\n",
                   left + opt.width_px, legend_y - 12.0, static_cast<double>(t1 - t0) / 1000.0);
  double lx = left;
  for (int k = 0; k <= static_cast<int>(TraceKind::kStep); ++k) {
    const auto kind = static_cast<TraceKind>(k);
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
                     lx, legend_y, kind_color(kind));
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", lx + 16.0, legend_y + 10.0,
                     trace_kind_name(kind));
    lx += 110.0;
  }
  s += "</svg>\n";
  return s;
}

std::string render_gantt_ascii(const std::vector<TraceEvent>& events, const GanttOptions& opt) {
  const auto lanes = gantt_lanes(events);
  const int cols = std::max(10, opt.ascii_columns);
  std::string out;
  if (events.empty()) return "(empty trace)\n";
  std::int64_t t0 = events.front().t_start, t1 = events.front().t_end;
  for (const auto& e : events) {
    t0 = std::min(t0, e.t_start);
    t1 = std::max(t1, e.t_end);
  }
  const double span = static_cast<double>(std::max<std::int64_t>(1, t1 - t0));
  std::vector<TraceEvent> sorted = events;
  sort_events(sorted);
  for (const auto& lane : lanes) {
    std::string cells(static_cast<std::size_t>(cols), '.');
    for (const auto& e : sorted) {
      if (e.lane() != lane) continue;
      auto a = static_cast<int>(std::floor(static_cast<double>(e.t_start - t0) / span * cols));
      auto b = static_cast<int>(std::ceil(static_cast<double>(e.t_end - t0) / span * cols));
      a = std::clamp(a, 0, cols - 1);
      b = std::clamp(std::max(b, a + 1), 1, cols);
      for (int i = a; i < b; ++i) cells[static_cast<std::size_t>(i)] = kind_glyph(e.kind);
    }
    out += fmt::format("{:<12}|{}|\n", lane, cells);
  }
  out += fmt::format("{:<12} 0 .. {:.1f} ms   F=forward B=backward X=fwd_bwd >=send <=recv "
                     "T=tool_exec t=think w=retrieve_wait S=step\n",
                     "", span / 1000.0);
  return out;
}

}  // namespace edgepipe
