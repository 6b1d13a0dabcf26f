// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <string>
#include <vector>

#include "edgepipe/trace.hpp"

namespace edgepipe {

struct GanttOptions {
  double width_px = 1000.0;  // plot area
  int ascii_columns = 100;
  std::string title;
};

// Lanes in display order: stage0, stage1, tool, agent, each followed by its
// link rows when present.
std::vector<std::string> gantt_lanes(const std::vector<TraceEvent>& events);

// One row per lane, time left to right, one fill colour per event kind and a
// legend. Byte-identical output for identical input.
std::string render_gantt_svg(const std::vector<TraceEvent>& events, const GanttOptions& opt = {});
std::string render_gantt_ascii(const std::vector<TraceEvent>& events, const GanttOptions& opt = {});

const char* kind_color(TraceKind k) noexcept;
char kind_glyph(TraceKind k) noexcept;

}  // namespace edgepipe
