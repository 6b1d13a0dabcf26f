// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

// Acceptance runner. Prints one "criterion N: PASS|FAIL ..." line per
// criterion and exits non-zero when any selected criterion fails.
//
//   acceptance            run all eight
//   acceptance --only 3   run one

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cli.hpp"
#include "edgepipe/analysis.hpp"
#include "edgepipe/host.hpp"
#include "edgepipe/planner.hpp"
#include "edgepipe/thermal.hpp"
#include "edgepipe/tool_broker.hpp"
#include "edgepipe/tool_queue.hpp"
#include "edgepipe/vector_index.hpp"
#include "edgepipe/verify.hpp"
#include "edgepipe/wire.hpp"
#include "edgepipe/worker_client.hpp"
#include "support.hpp"

using namespace edgepipe;
using namespace edgepipe::wire;
using edgepipe::testing::fixture;
using edgepipe::testing::LoopbackWorker;
using edgepipe::testing::vector_file;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr double kMakespanBand = 0.05;          // criterion 2, relative
constexpr double kVerifyTol = 1e-5;             // criterion 3
constexpr double kGradTolF32 = 1e-3;            // criterion 4
constexpr double kGradTolF64 = 1e-6;            // criterion 4
constexpr std::size_t kGradInstances = 20;      // criterion 4, per kind and dtype
constexpr double kBlockedLimitS = 0.010;        // criterion 6
constexpr double kOverlapSavingS = 0.600;       // criterion 6: 3 x 200 ms
constexpr double kOverlapEpsS = 0.005;          // criterion 6
constexpr double kRuntimeLimitS = 60.0;         // criterion 1

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- 1 -----------------------------------------------------------------------

Outcome serial_equivalence() {
  const ModelGraph g = load_model_config(fixture("mini-resnet.cfg")).with_batch(4);
  const ModelWeights w = init_weights(g, 2026);
  PipelineConfig c;
  c.microbatches = 8;
  c.microbatch_size = 4;
  c.batches = 20;
  c.lr = 0.05;
  c.seed = 2026;
  c.cut = 11;

  const auto t0 = Clock::now();
  LoopbackWorker worker;
  auto client = WorkerClient::connect(worker.address());
  const ExperimentResult piped = run_experiment(g, w, c, RunMode::kPipelined, client.get());
  client->close();
  const double piped_s = seconds_since(t0);
  const ExperimentResult serial = run_experiment(g, w, c, RunMode::kBaseline);

  std::size_t params = 0, mismatched = 0;
  double max_abs = 0.0;
  for (std::size_t l = 0; l < g.size(); ++l) {
    for (std::size_t p = 0; p < serial.final_weights[l].size(); ++p) {
      const Tensor& a = piped.final_weights[l][p];
      const Tensor& b = serial.final_weights[l][p];
      ++params;
      if (!a.bit_equal(b)) ++mismatched;
      for (std::size_t i = 0; i < a.numel(); ++i) {
        max_abs = std::max(max_abs, std::abs(a.at_as_double(i) - b.at_as_double(i)));
      }
    }
  }
  std::size_t violations = 0;
  for (const auto& r : piped.batches) violations += r.schedule_violations.size();
  const bool pass = mismatched == 0 && piped_s < kRuntimeLimitS && piped.batches.size() == 20;
  return {pass, fmt::format("mini-resnet {} params, 20 batches, M=8, cut {}: {}/{} tensors bit-equal, "
                            "max_abs_diff={:.3g}, schedule violations={}, pipelined runtime {:.2f} s "
                            "(limit {:.0f} s)",
                            g.param_count(), c.cut, params - mismatched, params, max_abs, violations,
                            piped_s, kRuntimeLimitS)};
}

// ---- 2 -----------------------------------------------------------------------

Outcome makespan_law() {
  const ModelGraph g = load_model_config(fixture("mini-resnet.cfg"));
  const auto cost_path = fixture("balanced_costs.cfg");
  PipelineConfig c;
  c.microbatches = 8;
  c.microbatch_size = g.input_shape[0];
  c.batches = 3;
  c.cut = 12;
  c.synthetic_costs = load_cost_file(cost_path, g.size());

  // Stage times straight from the cost file: t = per-microbatch fwd+bwd.
  const CostModel& cm = *c.synthetic_costs;
  double t0 = 0.0, t1 = 0.0;
  for (std::size_t l = 0; l < g.size(); ++l) (l < c.cut ? t0 : t1) += cm.forward[l] + cm.backward[l];
  const double t = std::max(t0, t1);
  const double m = static_cast<double>(c.microbatches);
  const double law_ms = (m + 1.0) * t * 1000.0;
  const double serial_ms = 2.0 * m * t * 1000.0;

  std::ifstream in(cost_path);
  WorkerOptions o;
  o.simulate_costs = std::string(std::istreambuf_iterator<char>(in), {});
  LoopbackWorker worker(o);
  auto client = WorkerClient::connect(worker.address());
  const ModelWeights w = init_weights(g, 1);
  const ExperimentResult base = run_experiment(g, w, c, RunMode::kBaseline);
  const ExperimentResult piped =
      run_experiment(g, w, c, RunMode::kPipelined, client.get(), nullptr, &base.summary);
  client->close();

  bool pass = std::abs(t0 - t1) < 1e-12;
  std::string walls;
  for (const auto& b : piped.batches) {
    pass = pass && std::abs(b.wall_ms - law_ms) <= kMakespanBand * law_ms;
    walls += fmt::format("{}{:.1f}", walls.empty() ? "" : ",", b.wall_ms);
  }
  const bool serial_ok = std::abs(base.summary.avg_ms - serial_ms) <= kMakespanBand * serial_ms;
  pass = pass && serial_ok;
  const double law_decrease = (serial_ms - law_ms) / serial_ms * 100.0;
  return {pass, fmt::format("t0={:.0f} ms t1={:.0f} ms, batch walls [{}] ms vs (M+1)t={:.0f} ms +/-{:.0f}%; "
                            "serial avg {:.1f} ms vs 2Mt={:.0f} ms; decrease measured {:.2f}% law {:.2f}%",
                            t0 * 1000, t1 * 1000, walls, law_ms, kMakespanBand * 100, base.summary.avg_ms,
                            serial_ms, piped.summary.percent_decrease.value_or(0.0), law_decrease)};
}

// ---- 3 -----------------------------------------------------------------------

Outcome op_verification() {
  const std::set<std::string> required{"matmul_broadcast", "conv2d", "linear", "relu",
                                       "dropout_mask_fixed", "softmax_xent"};
  const auto reports = run_op_verification(31337, 100);
  bool pass = true;
  bool fixture_flagged = false;
  std::set<std::string> seen;
  std::string worst;
  double worst_max = 0.0;
  for (const auto& r : reports) {
    seen.insert(r.op_name);
    if (r.expect_failure) {
      fixture_flagged = !r.within(kVerifyTol);
      continue;
    }
    if (!r.within(kVerifyTol)) pass = false;
    if (r.max_abs_diff >= worst_max) {
      worst_max = r.max_abs_diff;
      worst = r.op_name;
    }
  }
  for (const auto& name : required) pass = pass && seen.count(name) == 1;
  pass = pass && fixture_flagged;
  return {pass, fmt::format("{} ops x 100 F32 cases, worst max_abs_diff {:.3g} ({}), bound {:.0e}; "
                            "inverse-rate dropout fixture {}",
                            reports.size() - 1, worst_max, worst, kVerifyTol,
                            fixture_flagged ? "flagged" : "NOT flagged")};
}

// ---- 4 -----------------------------------------------------------------------

Outcome gradient_checks() {
  Prng prng(4);
  bool pass = true;
  std::string worst;
  for (LayerKind kind : edgepipe::testing::kAllLayerKinds) {
    for (DType dt : {DType::kF32, DType::kF64}) {
      const double tol = dt == DType::kF32 ? kGradTolF32 : kGradTolF64;
      double max_err = 0.0;
      for (std::size_t i = 0; i < kGradInstances; ++i) {
        for (const auto& r : edgepipe::testing::check_gradients(
                 edgepipe::testing::random_grad_case(kind, dt, prng))) {
          max_err = std::max(max_err, r.rel_err);
        }
      }
      if (!(max_err <= tol)) pass = false;
      worst += fmt::format("{}{}/{}={:.1e}", worst.empty() ? "" : " ", layer_kind_name(kind),
                           dt == DType::kF32 ? "f32" : "f64", max_err);
    }
  }
  return {pass, fmt::format("{} instances per kind and dtype, tol f32 {:.0e} f64 {:.0e}; max rel err: {}",
                            kGradInstances, kGradTolF32, kGradTolF64, worst)};
}

// ---- 5 -----------------------------------------------------------------------

Bytes read_vector(const std::string& name) {
  std::ifstream in(vector_file(name + ".bin"), std::ios::binary);
  if (!in) fail(Errc::kIo, "missing vector " + name);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

Errc tensor_error(const Bytes& b) {
  try {
    decode_tensor(std::span<const std::uint8_t>(b));
  } catch (const Error& e) {
    return e.code();
  }
  return Errc{};
}

Errc frame_error(const Bytes& b) {
  ByteReader r(b);
  try {
    wire::decode_frame(r);
  } catch (const Error& e) {
    return e.code();
  }
  return Errc{};
}

Outcome wire_conformance() {
  std::size_t golden_ok = 0, golden_total = 0;
  // 2x2 F32 [1,2,3,4], written out by hand.
  const Bytes f32_2x2{0x01, 0x02, 0x02, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00,
                      0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0x40,
                      0x00, 0x00, 0x40, 0x40, 0x00, 0x00, 0x80, 0x40};
  const Tensor t22 = Tensor::from<float>({2, 2}, {1, 2, 3, 4});
  ++golden_total;
  if (encode_tensor(t22) == f32_2x2 && read_vector("tensor_f32_2x2") == f32_2x2 &&
      decode_tensor(std::span<const std::uint8_t>(f32_2x2)).bit_equal(t22)) {
    ++golden_ok;
  }
  for (const char* name : {"tensor_f64_scalar", "tensor_i64_3", "tensor_i32_2x1", "tensor_u8_2x0"}) {
    ++golden_total;
    const Bytes b = read_vector(name);
    if (encode_tensor(decode_tensor(std::span<const std::uint8_t>(b))) == b) ++golden_ok;
  }
  for (const char* name : {"frame_tensor_f32_2x2", "frame_hello_host", "frame_step", "frame_shutdown",
                           "frame_error_tool", "frame_tool_begin", "frame_fwdbwd_req"}) {
    ++golden_total;
    const Bytes b = read_vector(name);
    ByteReader r(b);
    const wire::Frame f = wire::decode_frame(r);
    if (r.at_end() && wire::encode_frame(f) == b) ++golden_ok;
  }

  Prng p(5);
  static constexpr DType kinds[] = {DType::kF32, DType::kF64, DType::kI32, DType::kI64, DType::kU8};
  std::size_t fuzz_fail = 0;
  for (int i = 0; i < 10000; ++i) {
    Shape shape(p.next_u64() % 5);
    for (auto& d : shape) d = p.next_u64() % 5;
    Tensor t(kinds[p.next_u64() % 5], shape);
    for (auto& byte : t.raw_bytes_mut()) byte = static_cast<std::uint8_t>(p.next_u64());
    const Bytes b = encode_tensor(t);
    const Tensor back = decode_tensor(std::span<const std::uint8_t>(b));
    if (!back.bit_equal(t) || encode_tensor(back) != b) ++fuzz_fail;
  }

  const std::map<std::string, std::pair<Errc, Errc>> bad{
      {"bad_unknown_dtype", {tensor_error(read_vector("bad_unknown_dtype")), Errc::kUnknownDType}},
      {"bad_truncated_header", {tensor_error(read_vector("bad_truncated_header")), Errc::kTruncatedHeader}},
      {"bad_truncated_payload", {tensor_error(read_vector("bad_truncated_payload")), Errc::kTruncatedPayload}},
      {"bad_frame_truncated_header",
       {frame_error(read_vector("bad_frame_truncated_header")), Errc::kTruncatedHeader}},
      {"bad_frame_unknown_kind", {frame_error(read_vector("bad_frame_unknown_kind")), Errc::kProtocol}},
  };
  bool bad_ok = true;
  std::set<Errc> tensor_codes;
  std::string bad_text;
  for (const auto& [name, got_want] : bad) {
    bad_ok = bad_ok && got_want.first == got_want.second;
    if (name.rfind("bad_frame", 0) != 0) tensor_codes.insert(got_want.first);
    bad_text += fmt::format(" {}={}", name, errc_name(got_want.first));
  }
  bad_ok = bad_ok && tensor_codes.size() == 3;
  const bool pass = golden_ok == golden_total && fuzz_fail == 0 && bad_ok;
  return {pass, fmt::format("golden {}/{} bit-exact, fuzz 10000 cases {} failures, errors:{}", golden_ok,
                            golden_total, fuzz_fail, bad_text)};
}

// ---- 6 -----------------------------------------------------------------------

Outcome tool_overlap() {
  const AgentScript script = load_agent_script(fixture("agent_demo.script"));
  std::size_t begins = 0;
  double think = 0.0;
  for (const auto& s : script.steps) {
    begins += s.kind == AgentStep::Kind::kBegin;
    if (s.kind == AgentStep::Kind::kThink) think += s.seconds;
  }
  ToolQueue queue;
  register_vector_search(queue, std::make_shared<const VectorIndex>(default_index()));
  LocalToolEndpoint endpoint(queue);
  ToolBroker broker(endpoint);
  broker.inject_delay(kVectorSearchTool, 0.2);
  const Timeline tl = run_agent_script(script, broker);
  const double saved = tl.serialized_baseline_s - tl.total_s;
  bool pass = begins == 3 && tl.blocked_s < kBlockedLimitS && saved >= kOverlapSavingS - kOverlapEpsS;

  // FIFO under randomized per-call delays.
  ToolQueue fifo;
  fifo.register_tool("sleep_echo", [](const Bytes& args) {
    std::this_thread::sleep_for(std::chrono::microseconds(args.at(0) * 4));
    return args;
  });
  Prng prng(6);
  std::size_t fifo_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + prng.next_u64() % 5;
    std::vector<std::pair<std::uint64_t, Bytes>> issued;
    for (std::size_t i = 0; i < n; ++i) {
      Bytes args{static_cast<std::uint8_t>(prng.next_u64() % 64), static_cast<std::uint8_t>(trial),
                 static_cast<std::uint8_t>(i)};
      issued.emplace_back(fifo.begin("sleep_echo", args), args);
    }
    for (const auto& [ticket, args] : issued) {
      const ToolResult r = fifo.retrieve();
      if (r.ticket != ticket || r.payload != args) ++fifo_fail;
    }
  }
  pass = pass && fifo_fail == 0;
  return {pass, fmt::format("{} begins at 200 ms, think {:.1f} s: total {:.3f} s, blocked {:.1f} ms "
                            "(limit {:.0f} ms), serialized {:.3f} s, saved {:.3f} s (need >= {:.3f}); "
                            "FIFO 1000 trials {} failures",
                            begins, think, tl.total_s, tl.blocked_s * 1000, kBlockedLimitS * 1000,
                            tl.serialized_baseline_s, saved, kOverlapSavingS - kOverlapEpsS, fifo_fail)};
}

// ---- 7 -----------------------------------------------------------------------

struct AnalyzeRow {
  std::string avg_2dp;
  std::optional<double> decrease;
};

std::map<std::string, AnalyzeRow> analyze(const std::vector<std::string>& extra, std::string& table) {
  std::vector<std::string> args{"trace", "analyze", "--raw", fixture("batch_times.json").string(), "--json"};
  args.insert(args.end(), extra.begin(), extra.end());
  std::ostringstream out, err;
  if (cli::cli_main(args, out, err) != cli::kExitOk) fail(Errc::kInvalidArgument, err.str());
  std::map<std::string, AnalyzeRow> rows;
  static const std::regex name_re("\"series\":\"([^\"]+)\"");
  static const std::regex avg_re("\"avg_ms_2dp\":\"([^\"]+)\"");
  static const std::regex dec_re("\"percent_decrease\":([-0-9.eE+]+)");
  std::istringstream lines(out.str());
  std::string line;
  while (std::getline(lines, line)) {
    std::smatch m;
    if (line.empty() || line[0] != '{') {
      table += line + "\n";
      continue;
    }
    if (!std::regex_search(line, m, name_re)) continue;
    AnalyzeRow& row = rows[m[1]];
    if (std::regex_search(line, m, avg_re)) row.avg_2dp = m[1];
    if (std::regex_search(line, m, dec_re)) row.decrease = std::stod(m[1]);
  }
  return rows;
}

Outcome table_reproduction() {
  // Reference averages and decreases for the recorded runs.
  const std::vector<std::pair<std::string, std::string>> want_avg{
      {"desktop_alone", "13104.75"}, {"desktop_iph11", "10162.54"}, {"desktop_iph16", "7308.26"},
      {"mac_alone", "9008.52"},      {"mac_iph16", "6719.06"}};
  const std::vector<std::tuple<std::string, std::string, std::string, std::string>> want_dec{
      {"desktop_alone", "desktop_iph11", "22.45", "22%"},
      {"desktop_alone", "desktop_iph16", "44.23", "44%"},
      {"mac_alone", "mac_iph16", "25.41", "25%"}};

  bool pass = true;
  std::string detail;
  std::string table;
  const auto all = analyze({}, table);
  for (const auto& [series, want] : want_avg) {
    const auto it = all.find(series);
    const std::string got = it == all.end() ? "missing" : it->second.avg_2dp;
    const bool ok = got == want;
    pass = pass && ok;
    detail += fmt::format(" {}={}{}", series, got, ok ? "" : fmt::format(" (want {})", want));
  }
  detail += ";";
  for (const auto& [base, series, want, want_int] : want_dec) {
    std::string dec_table;
    const auto rows = analyze({"--baseline", base, "--series", series}, dec_table);
    const auto it = rows.find(series);
    const std::string got = it == rows.end() || !it->second.decrease
                                ? "missing"
                                : format_fixed(*it->second.decrease, 2);
    const bool ok = got == want && dec_table.find(want_int) != std::string::npos;
    pass = pass && ok;
    detail += fmt::format(" {}->{}={}%{}", base, series, got, ok ? "" : fmt::format(" (want {}%)", want));
  }
  return {pass, "trace analyze:" + detail};
}

// ---- 8 -----------------------------------------------------------------------

int rank(ThermalState s) { return static_cast<int>(s); }

Outcome thermal_simulation() {
  const ThermalConfig cfg = load_thermal_config(fixture("thermal.cfg"));
  std::ifstream in(fixture("thermal_scenario.cfg"));
  const ThermalScenario sc = parse_thermal_scenario(std::string(std::istreambuf_iterator<char>(in), {}));
  const auto run = run_thermal_scenario(cfg, sc);

  std::size_t first_fair = 0, first_serious = 0;
  bool ordered = true, factor_exact = true;
  for (std::size_t i = 0; i < run.size(); ++i) {
    if (!first_fair && run[i].state != ThermalState::kMinimal) first_fair = run[i].batch;
    if (!first_serious && run[i].state == ThermalState::kSerious) first_serious = run[i].batch;
    if (i > 0 && rank(run[i].state) < rank(run[i - 1].state)) ordered = false;
    const bool throttled = i > 0 && run[i - 1].state == ThermalState::kSerious;
    const double want = throttled ? sc.busy_seconds * cfg.throttle_factor : sc.busy_seconds;
    if (run[i].seconds != want) factor_exact = false;
  }
  const bool reached_fair_first = first_fair != 0 && first_fair < first_serious &&
                                  run[first_fair - 1].state == ThermalState::kFair;
  const bool calibrated = first_fair == 13 && first_serious == 17;
  const double step_ratio =
      first_serious < run.size() ? run[first_serious].seconds / run[first_serious - 1].seconds : 0.0;

  // Monotonicity: a pointwise hotter load (more busy, less idle) never leaves
  // the model in a cooler state, and a net-heating load never cools it.
  Prng prng(8);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    ThermalConfig c;
    c.gain = prng.next_uniform(0.1, 3.0);
    c.dissipation = prng.next_uniform(0.0, 3.0);
    c.fair_at = prng.next_uniform(1.0, 40.0);
    c.serious_at = c.fair_at + prng.next_uniform(0.5, 40.0);
    c.throttle_factor = prng.next_uniform(1.0, 1.2);
    ThermalModel base(c), hot(c), heating(c);
    for (int step = 0; step < 50; ++step) {
      const double busy = prng.next_uniform(0.0, 5.0);
      const double idle = prng.next_uniform(0.0, 5.0);
      const ThermalState before = heating.state();
      const ThermalState s_base = base.advance(busy, idle);
      const ThermalState s_hot =
          hot.advance(busy + prng.next_uniform(0.0, 1.0), std::max(0.0, idle - prng.next_uniform(0.0, 1.0)));
      const double net_idle = c.dissipation > 0 ? std::min(idle, c.gain * busy / c.dissipation) : idle;
      const ThermalState s_heat = heating.advance(busy, net_idle);
      if (rank(s_hot) < rank(s_base) || hot.heat() < base.heat()) ++violations;
      if (rank(s_heat) < rank(before)) ++violations;
    }
  }

  const bool pass = ordered && reached_fair_first && calibrated && factor_exact && violations == 0 &&
                    first_serious != 0;
  return {pass, fmt::format("{} batches: Minimal->Fair at {}, Fair->Serious at {}, sequence {}, "
                            "throttled batch time x{:.4f} (factor {}), exact={}; monotonicity 1000 "
                            "sequences {} violations",
                            run.size(), first_fair, first_serious, ordered ? "monotone" : "NOT monotone",
                            step_ratio, cfg.throttle_factor, factor_exact ? "yes" : "no", violations)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edgepipe acceptance runner"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion")->check(CLI::Range(1, 8));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> criteria{
      serial_equivalence, makespan_law,  op_verification,    gradient_checks,
      wire_conformance,   tool_overlap,  table_reproduction, thermal_simulation};
  int failed = 0;
  for (int n = 1; n <= 8; ++n) {
    if (only != 0 && n != only) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[static_cast<std::size_t>(n - 1)]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << fmt::format("criterion {}: {} {} [{:.2f} s]", n, o.pass ? "PASS" : "FAIL", o.detail,
                             seconds_since(t0))
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
