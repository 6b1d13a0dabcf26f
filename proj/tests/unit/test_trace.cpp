// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include <gtest/gtest.h>

#include <filesystem>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "edgepipe/analysis.hpp"
#include "edgepipe/gantt.hpp"
#include "edgepipe/trace.hpp"
#include "support.hpp"

using namespace edgepipe;
using edgepipe::testing::fixture;

namespace {

TraceEvent ev(Device d, TraceKind k, std::int64_t s, std::int64_t e, std::uint32_t mb = 1,
              std::uint32_t batch = 0) {
  TraceEvent t;
  t.device = d;
  t.kind = k;
  t.t_start = s;
  t.t_end = e;
  t.microbatch = mb;
  t.batch = batch;
  return t;
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

const std::vector<double>& series(const std::vector<std::pair<std::string, std::vector<double>>>& all,
                                  const std::string& name) {
  for (const auto& [n, v] : all) {
    if (n == name) return v;
  }
  throw std::runtime_error("missing series " + name);
}

}  // namespace

TEST(TraceJson, RoundTrip) {
  TraceEvent e = ev(Device::kStage1, TraceKind::kFwdBwd, 10, 25, 3, 2);
  e.label = "FB3 \"quoted\"";
  const std::string line = event_to_json(e);
  EXPECT_NE(line.find("\"t_start\":10"), std::string::npos) << line;
  EXPECT_NE(line.find("\"kind\":\"fwd_bwd\""), std::string::npos) << line;
  EXPECT_EQ(event_from_json(line), e);
  EXPECT_THROW(event_from_json("{\"t_start\":1}"), Error);
  EXPECT_THROW(event_from_json("not json"), Error);
}

TEST(TraceJson, FileRoundTripIsSorted) {
  const auto path = std::filesystem::temp_directory_path() / "edgepipe_trace_test.jsonl";
  std::vector<TraceEvent> events{ev(Device::kStage0, TraceKind::kBackward, 50, 60),
                                 ev(Device::kStage0, TraceKind::kForward, 0, 10)};
  write_trace(path, events);
  const auto back = read_trace(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].kind, TraceKind::kForward);
  std::filesystem::remove(path);
}

TEST(TraceRecorder, BoundedAndThreadSafe) {
  TraceRecorder rec(1000);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 500; ++i) rec.record(ev(Device::kStage0, TraceKind::kForward, t * 1000 + i, t * 1000 + i));
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(rec.size(), 1000u);
  EXPECT_EQ(rec.dropped(), 1000u);
}

TEST(LaneExclusivity, DetectsOverlapAndInvertedIntervals) {
  EXPECT_TRUE(check_lane_exclusivity({ev(Device::kStage0, TraceKind::kForward, 0, 10),
                                      ev(Device::kStage0, TraceKind::kForward, 10, 20),
                                      ev(Device::kStage1, TraceKind::kFwdBwd, 5, 15)})
                  .empty());
  EXPECT_EQ(check_lane_exclusivity({ev(Device::kStage0, TraceKind::kForward, 0, 10),
                                    ev(Device::kStage0, TraceKind::kBackward, 9, 20)})
                .size(),
            1u);
  EXPECT_EQ(check_lane_exclusivity({ev(Device::kStage0, TraceKind::kForward, 10, 5)}).size(), 1u);
  // Send rows are separate lanes from compute rows.
  EXPECT_TRUE(check_lane_exclusivity({ev(Device::kStage0, TraceKind::kForward, 0, 10),
                                      ev(Device::kStage0, TraceKind::kSend, 2, 8)})
                  .empty());
}

TEST(Gantt, DeterministicAndStructured) {
  const std::vector<TraceEvent> events{ev(Device::kStage0, TraceKind::kForward, 0, 100, 1),
                                       ev(Device::kStage0, TraceKind::kForward, 100, 200, 2),
                                       ev(Device::kStage1, TraceKind::kFwdBwd, 100, 300, 1)};
  GanttOptions o;
  o.title = "m=2";
  const std::string a = render_gantt_svg(events, o);
  EXPECT_EQ(a, render_gantt_svg(events, o));
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("m=2"), std::string::npos);
  EXPECT_NE(a.find(kind_color(TraceKind::kFwdBwd)), std::string::npos);
  EXPECT_EQ(gantt_lanes(events), (std::vector<std::string>{"stage0", "stage1"}));
}

TEST(Gantt, SingleEventSpansThePlot) {
  GanttOptions o;
  o.ascii_columns = 10;
  const std::string s = render_gantt_ascii({ev(Device::kStage0, TraceKind::kForward, 0, 50)}, o);
  EXPECT_NE(s.find(std::string(10, kind_glyph(TraceKind::kForward))), std::string::npos) << s;
}

TEST(Gantt, EmptyTraceRendersEmptyChart) {
  const std::string s = render_gantt_svg({});
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  EXPECT_NO_THROW(render_gantt_ascii({}));
}

TEST(Analysis, RecordedAveragesFromMeanOracle) {
  const auto all = load_raw_series(fixture("batch_times.json"));
  for (const auto& [name, values] : all) {
    const RunSummary s = summarize_series(name, values);
    EXPECT_NEAR(s.avg_ms, mean(values), 1e-9) << name;
    EXPECT_EQ(s.avg_text(), fmt::format("{:.2f}", mean(values))) << name;
    EXPECT_NEAR(s.total_s, std::accumulate(values.begin(), values.end(), 0.0) / 1000.0, 1e-9);
  }
}

TEST(Analysis, StatedAveragesThatTheRawListsSupport) {
  const auto all = load_raw_series(fixture("batch_times.json"));
  EXPECT_EQ(series(all, "desktop_alone").size(), 20u);
  EXPECT_EQ(summarize_series("x", series(all, "desktop_alone")).avg_text(), "13104.75");
  EXPECT_EQ(summarize_series("x", series(all, "desktop_iph16")).avg_text(), "7308.26");
  EXPECT_EQ(summarize_series("x", series(all, "mac_alone")).avg_text(), "9008.52");
  EXPECT_EQ(summarize_series("x", series(all, "mac_iph16")).avg_text(), "6719.06");
  EXPECT_EQ(series(all, "thermal_test").size(), 30u);
}

TEST(Analysis, PercentDecrease) {
  const auto all = load_raw_series(fixture("batch_times.json"));
  const RunSummary base = summarize_series("desktop_alone", series(all, "desktop_alone"));
  const RunSummary i16 = summarize_series("desktop_iph16", series(all, "desktop_iph16"));
  const double d = percent_decrease(base, i16);
  EXPECT_NEAR(d, (base.avg_ms - i16.avg_ms) / base.avg_ms * 100.0, 1e-12);
  EXPECT_EQ(fmt::format("{:.2f}", d), "44.23");
  const RunSummary mac = summarize_series("mac_alone", series(all, "mac_alone"));
  const RunSummary mac16 = summarize_series("mac_iph16", series(all, "mac_iph16"));
  EXPECT_EQ(fmt::format("{:.2f}", percent_decrease(mac, mac16)), "25.41");
  // Thermal run has 30 batches, the others 20.
  EXPECT_THROW(percent_decrease(base, summarize_series("t", series(all, "thermal_test"))), Error);
}

TEST(Analysis, TablePrintsIntegerPercentJsonExact) {
  RunSummary base = summarize_series("base", {100, 100});
  RunSummary fast = summarize_series("fast", {55.77, 55.77});
  fast.percent_decrease = percent_decrease(base, fast);
  const std::string table = format_summary_table({base, fast});
  EXPECT_NE(table.find("44%"), std::string::npos) << table;
  const std::string json = format_summary_json(fast);
  EXPECT_NE(json.find("44.23"), std::string::npos) << json;
}

TEST(Analysis, EmptySeriesRejected) { EXPECT_THROW(summarize_series("x", {}), Error); }

TEST(Analysis, TraceSummaryBusyAndIdle) {
  const std::vector<TraceEvent> events{ev(Device::kStage0, TraceKind::kForward, 0, 100000, 1, 0),
                                       ev(Device::kStage1, TraceKind::kFwdBwd, 50000, 200000, 1, 0),
                                       ev(Device::kStage0, TraceKind::kBackward, 200000, 300000, 1, 0)};
  const RunSummary s = summarize_trace("t", events);
  ASSERT_EQ(s.batch_ms.size(), 1u);
  EXPECT_DOUBLE_EQ(s.batch_ms[0], 300.0);
  EXPECT_DOUBLE_EQ(s.devices.at("stage0").busy_s, 0.2);
  EXPECT_DOUBLE_EQ(s.devices.at("stage0").idle_s, 0.1);
  EXPECT_DOUBLE_EQ(s.devices.at("stage1").busy_s, 0.15);
}

TEST(Analysis, FormatFixedRoundsHalfAwayFromZero) {
  EXPECT_EQ(format_fixed(2.345, 2), "2.35");
  EXPECT_EQ(format_fixed(-2.345, 2), "-2.35");
  EXPECT_EQ(format_fixed(10162.557395, 2), "10162.56");
}
