// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "edgepipe/analysis.hpp"
#include "edgepipe/error.hpp"
#include "edgepipe/gantt.hpp"
#include "edgepipe/host.hpp"
#include "edgepipe/model_graph.hpp"
#include "edgepipe/net.hpp"
#include "edgepipe/planner.hpp"
#include "edgepipe/thermal.hpp"
#include "edgepipe/tool_broker.hpp"
#include "edgepipe/trace.hpp"
#include "edgepipe/vector_index.hpp"
#include "edgepipe/verify.hpp"
#include "edgepipe/worker.hpp"
#include "edgepipe/worker_client.hpp"

namespace edgepipe::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HostOpts {
  std::string model;
  std::string worker;
  std::string split = "auto";
  std::string costs;
  std::string trace;
  std::size_t batches = 1;
  std::size_t microbatches = 8;
  std::size_t mb_size = 0;  // 0: the model's input batch
  double lr = 0.01;
  std::uint64_t seed = 1;
  double bandwidth = std::numeric_limits<double>::infinity();
  double latency = 0.0;
  bool json = false;
  bool baseline_only = false;
};

struct WorkerOpts {
  std::string listen = "127.0.0.1:7070";
  std::string simulate_costs;
  std::string thermal;
  std::string trace;
  std::string corpus;
  std::uint64_t max_bytes = 0;
  std::size_t tool_capacity = 64;
};

struct DemoOpts {
  std::string script;
  std::string worker;
  std::string trace;
  std::string corpus;
  double delay = 0.0;
};

struct EmbedOpts {
  std::string in;
  std::string out;
  std::size_t dim = 32;
};

struct RenderOpts {
  std::string in;
  std::string out;
  std::string title;
  bool ascii = false;
  double width = 1000.0;
};

struct AnalyzeOpts {
  std::string raw;
  std::string trace;
  std::vector<std::string> series;
  std::string baseline;
  bool json = false;
};

struct PlanOpts {
  std::string model;
  std::string costs;
  std::size_t microbatches = 8;
  std::uint64_t seed = 1;
  double bandwidth = std::numeric_limits<double>::infinity();
  double latency = 0.0;
};

struct ThermalOpts {
  std::string config;
  std::string scenario;
};

struct VerifyOpts {
  std::size_t cases = 100;
  std::uint64_t seed = 1;
};

// ---- shared helpers ------------------------------------------------------------

struct Loaded {
  ModelGraph graph;  // batch = microbatch size
  ModelWeights weights;
  std::optional<CostModel> costs;
};

Loaded load_model(const HostOpts& o) {
  Loaded l;
  ModelGraph g = load_model_config(o.model);
  const std::size_t mb = o.mb_size ? o.mb_size : g.input_shape.at(0);
  l.graph = g.with_batch(mb);
  l.weights = init_weights(l.graph, o.seed);
  if (!o.costs.empty()) l.costs = load_cost_file(o.costs, l.graph.size());
  return l;
}

std::size_t resolve_cut(const Loaded& l, const HostOpts& o, std::ostream& out) {
  if (o.split.rfind("index:", 0) == 0) {
    std::size_t cut = 0;
    try {
      std::size_t used = 0;
      cut = std::stoul(o.split.substr(6), &used);
      if (used != o.split.size() - 6) throw std::invalid_argument(o.split);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("--split: bad index in '{}'", o.split));
    }
    return cut;
  }
  if (o.split != "auto") throw UsageError("--split must be 'auto' or 'index:<i>'");
  const CostModel costs = l.costs ? *l.costs : measured_costs(l.graph, l.weights, o.seed);
  LinkModel link;
  link.bandwidth = o.bandwidth;
  link.latency = o.latency;
  const PartitionSpec spec = plan_split(l.graph, costs, link, o.microbatches);
  out << fmt::format("split: auto -> cut {} (stage0 layers 0..{}, stage1 layers {}..{})\n",
                     spec.cut_index, spec.cut_index - 1, spec.cut_index, l.graph.size() - 1);
  return spec.cut_index;
}

PipelineConfig make_config(const Loaded& l, const HostOpts& o, std::size_t cut) {
  PipelineConfig c;
  c.microbatches = o.microbatches;
  c.microbatch_size = l.graph.input_shape.at(0);
  c.batches = o.batches;
  c.lr = o.lr;
  c.seed = o.seed;
  c.cut = cut;
  c.synthetic_costs = l.costs;
  return c;
}

void print_reports(const std::vector<BatchReport>& reports, std::ostream& out, std::ostream& err) {
  out << fmt::format("{:>5} {:>11} {:>10} {:>11} {:>11} {:>11} {:>11}\n", "batch", "wall_ms",
                     "loss", "s0_busy_ms", "s0_idle_ms", "s1_busy_ms", "s1_idle_ms");
  for (const auto& r : reports) {
    out << fmt::format("{:>5} {:>11.2f} {:>10.5f} {:>11.2f} {:>11.2f} {:>11.2f} {:>11.2f}\n",
                       r.batch, r.wall_ms, r.loss, r.stage0_busy_ms, r.stage0_idle_ms,
                       r.stage1_busy_ms, r.stage1_idle_ms);
    for (const auto& v : r.schedule_violations) err << "warning: schedule check: " << v << "\n";
  }
}

void flush_trace(const TraceRecorder& rec, const std::string& path, std::ostream& out) {
  if (path.empty()) return;
  rec.flush(path);
  out << fmt::format("trace: {} events -> {}", rec.size(), path);
  if (rec.dropped()) out << fmt::format(" ({} dropped)", rec.dropped());
  out << "\n";
}

// ---- commands -------------------------------------------------------------------

int cmd_host_train(const HostOpts& o, std::ostream& out, std::ostream& err) {
  const Loaded l = load_model(o);
  const std::size_t cut = resolve_cut(l, o, out);
  const PipelineConfig cfg = make_config(l, o, cut);
  TraceRecorder rec;
  auto client = WorkerClient::connect(o.worker);
  const ExperimentResult r = run_experiment(l.graph, l.weights, cfg, RunMode::kPipelined,
                                            client.get(), o.trace.empty() ? nullptr : &rec);
  client->close();
  print_reports(r.batches, out, err);
  out << format_summary_table({r.summary});
  if (o.json) out << format_summary_json(r.summary) << "\n";
  flush_trace(rec, o.trace, out);
  return kExitOk;
}

int cmd_host_infer(const HostOpts& o, std::ostream& out, std::ostream& err) {
  (void)err;
  const Loaded l = load_model(o);
  const std::size_t cut = resolve_cut(l, o, out);
  const PipelineConfig cfg = make_config(l, o, cut);
  TraceRecorder rec;
  auto client = WorkerClient::connect(o.worker);
  PipelineHost host(l.graph, l.weights, cfg, *client, o.trace.empty() ? nullptr : &rec);
  host.load();
  std::vector<double> ms;
  out << fmt::format("{:>5} {:>11} {:>14}\n", "batch", "wall_ms", "output_sum");
  for (std::size_t b = 0; b < o.batches; ++b) {
    const Batch data = synthetic_batch(l.graph, o.seed, b, o.microbatches);
    const Tensor y = host.infer_batch(static_cast<std::uint32_t>(b), data.inputs);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) sum += y.at_as_double(i);
    ms.push_back(host.last_report().wall_ms);
    out << fmt::format("{:>5} {:>11.2f} {:>14.6f}\n", b, ms.back(), sum);
  }
  client->close();
  RunSummary s = summarize_series("pipelined-infer", ms);
  out << format_summary_table({s});
  if (o.json) out << format_summary_json(s) << "\n";
  flush_trace(rec, o.trace, out);
  return kExitOk;
}

int cmd_host_bench(const HostOpts& o, std::ostream& out, std::ostream& err) {
  const Loaded l = load_model(o);
  const std::size_t cut = resolve_cut(l, o, out);
  const PipelineConfig cfg = make_config(l, o, cut);
  TraceRecorder rec;
  TraceRecorder* tr = o.trace.empty() ? nullptr : &rec;
  std::vector<RunSummary> rows;
  const ExperimentResult base =
      run_experiment(l.graph, l.weights, cfg, RunMode::kBaseline, nullptr, o.worker.empty() ? tr : nullptr);
  rows.push_back(base.summary);
  if (!o.baseline_only) {
    if (o.worker.empty()) throw UsageError("bench needs --worker unless --baseline is given");
    auto client = WorkerClient::connect(o.worker);
    const ExperimentResult piped = run_experiment(l.graph, l.weights, cfg, RunMode::kPipelined,
                                                  client.get(), tr, &base.summary);
    client->close();
    print_reports(piped.batches, out, err);
    rows.push_back(piped.summary);
  }
  out << format_summary_table(rows);
  if (o.json) {
    for (const auto& r : rows) out << format_summary_json(r) << "\n";
  }
  flush_trace(rec, o.trace, out);
  return kExitOk;
}

// SIGINT/SIGTERM stop the server from a dedicated thread; SIGUSR1 just wakes
// that thread when the server exits on its own.
int cmd_worker(const WorkerOpts& o, std::ostream& out, std::ostream& err) {
  (void)err;
  WorkerOptions w;
  w.max_bytes = o.max_bytes;
  w.tool_capacity = o.tool_capacity;
  if (!o.simulate_costs.empty()) w.simulate_costs = read_text_file(o.simulate_costs);
  if (!o.thermal.empty()) w.thermal = load_thermal_config(o.thermal);
  if (!o.corpus.empty()) w.index = std::make_shared<const VectorIndex>(load_embdb(o.corpus));
  TraceRecorder rec;
  if (!o.trace.empty()) w.trace = &rec;

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGUSR1);
  sigset_t old;
  pthread_sigmask(SIG_BLOCK, &set, &old);
  WorkerServer server(w);
  std::thread watcher([&] {
    int sig = 0;
    sigwait(&set, &sig);
    if (sig != SIGUSR1) server.stop();
  });
  std::optional<Error> failure;
  try {
    server.serve(o.listen, [&](std::uint16_t port) {
      out << fmt::format("worker listening on {}:{}", net::parse_endpoint(o.listen).host, port)
          << std::endl;
    });
  } catch (const Error& e) {
    failure = e;
  }
  pthread_kill(watcher.native_handle(), SIGUSR1);
  watcher.join();
  pthread_sigmask(SIG_SETMASK, &old, nullptr);
  if (failure) throw *failure;
  out << fmt::format("worker stopped after {} session(s)\n", server.sessions_served());
  flush_trace(rec, o.trace, out);
  return kExitOk;
}

int cmd_tools_demo(const DemoOpts& o, std::ostream& out, std::ostream& err) {
  (void)err;
  const AgentScript script = load_agent_script(o.script);
  auto index = o.corpus.empty() ? std::make_shared<const VectorIndex>(default_index())
                                : std::make_shared<const VectorIndex>(load_embdb(o.corpus));
  TraceRecorder rec;
  std::unique_ptr<ToolQueue> queue;
  std::unique_ptr<WorkerClient> client;
  std::unique_ptr<ToolEndpoint> endpoint;
  if (o.worker.empty()) {
    queue = std::make_unique<ToolQueue>();
    register_vector_search(*queue, index);
    endpoint = std::make_unique<LocalToolEndpoint>(*queue);
  } else {
    client = WorkerClient::connect(o.worker);
    endpoint = std::make_unique<RemoteToolEndpoint>(*client);
  }
  ToolBroker broker(*endpoint);
  broker.inject_delay(kVectorSearchTool, o.delay);
  const Timeline tl = run_agent_script(script, broker, &rec);
  if (client) client->close();

  const std::int64_t t0 = tl.entries.empty() ? 0 : tl.entries.front().start_us;
  for (const auto& e : tl.entries) {
    out << fmt::format("{:>9.1f} ms  {:<9}", static_cast<double>(e.start_us - t0) / 1000.0,
                       e.step.kind == AgentStep::Kind::kBegin      ? "begin"
                       : e.step.kind == AgentStep::Kind::kRetrieve ? "retrieve"
                                                                   : "think");
    switch (e.step.kind) {
      case AgentStep::Kind::kBegin:
        out << fmt::format(" #{} \"{}\" k={}\n", e.ticket, e.step.query, e.step.k);
        break;
      case AgentStep::Kind::kThink:
        out << fmt::format(" {:.3f} s \"{}\"\n", e.step.seconds, e.step.label);
        break;
      case AgentStep::Kind::kRetrieve: {
        out << fmt::format(" #{} blocked {:.1f} ms", e.ticket, e.blocked_s * 1000.0);
        if (e.result && e.result->status == wire::ToolStatus::kDone) {
          const auto hits = decode_hits(e.result->payload);
          if (!hits.empty()) {
            out << fmt::format("  top: [{}] {:.4f} {}", hits[0].index, hits[0].score, hits[0].text);
          }
        } else if (e.result) {
          out << "  failed: " << std::string(e.result->payload.begin(), e.result->payload.end());
        }
        out << "\n";
        break;
      }
    }
  }
  out << fmt::format("total {:.3f} s  blocked {:.3f} s  think {:.3f} s  tool {:.3f} s\n",
                     tl.total_s, tl.blocked_s, tl.think_s, tl.tool_exec_s);
  out << fmt::format("serialized baseline {:.3f} s  (saved {:.3f} s)\n", tl.serialized_baseline_s,
                     tl.serialized_baseline_s - tl.total_s);
  flush_trace(rec, o.trace, out);
  return kExitOk;
}

int cmd_tools_embed(const EmbedOpts& o, std::ostream& out) {
  std::vector<std::string> texts;
  std::istringstream in(read_text_file(o.in));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) texts.push_back(line);
  }
  if (texts.empty()) fail(Errc::kInvalidArgument, fmt::format("{} holds no texts", o.in));
  save_embdb(o.out, build_index(texts, o.dim));
  out << fmt::format("embedded {} texts (d={}) -> {}\n", texts.size(), o.dim, o.out);
  return kExitOk;
}

int cmd_trace_render(const RenderOpts& o, std::ostream& out) {
  const auto events = read_trace(o.in);
  GanttOptions g;
  g.title = o.title;
  g.width_px = o.width;
  if (o.ascii) out << render_gantt_ascii(events, g);
  if (!o.out.empty()) {
    std::ofstream f(o.out, std::ios::binary);
    if (!f) fail(Errc::kIo, fmt::format("cannot write {}", o.out));
    f << render_gantt_svg(events, g);
    if (!f) fail(Errc::kIo, fmt::format("write failed: {}", o.out));
    out << fmt::format("rendered {} events -> {}\n", events.size(), o.out);
  } else if (!o.ascii) {
    out << render_gantt_svg(events, g);
  }
  for (const auto& p : check_lane_exclusivity(events)) out << "warning: " << p << "\n";
  return kExitOk;
}

int cmd_trace_analyze(const AnalyzeOpts& o, std::ostream& out) {
  std::vector<RunSummary> rows;
  if (!o.trace.empty()) {
    rows.push_back(summarize_trace(std::filesystem::path(o.trace).stem().string(),
                                   read_trace(o.trace)));
  } else {
    const auto all = load_raw_series(o.raw);
    const auto find = [&](const std::string& name) -> const std::vector<double>& {
      for (const auto& [n, v] : all) {
        if (n == name) return v;
      }
      std::vector<std::string> names;
      for (const auto& [n, v] : all) names.push_back(n);
      const std::string hint = suggest(name, names);
      throw UsageError(fmt::format("no series '{}' in {}{}", name, o.raw,
                                   hint.empty() ? "" : fmt::format(" (did you mean '{}'?)", hint)));
    };
    std::optional<RunSummary> base;
    if (!o.baseline.empty()) base = summarize_series(o.baseline, find(o.baseline));
    const bool explicit_series = !o.series.empty();
    std::vector<std::string> names = o.series;
    if (!explicit_series) {
      for (const auto& [n, v] : all) names.push_back(n);
    }
    for (const auto& n : names) {
      RunSummary s = summarize_series(n, find(n));
      if (base && n != base->name) {
        if (explicit_series || s.batch_ms.size() == base->batch_ms.size()) {
          s.percent_decrease = percent_decrease(*base, s);
        }
      }
      rows.push_back(std::move(s));
    }
  }
  out << format_summary_table(rows);
  if (o.json) {
    for (const auto& r : rows) out << format_summary_json(r) << "\n";
  }
  return kExitOk;
}

int cmd_verify(const VerifyOpts& o, std::ostream& out) {
  const auto reports = run_op_verification(o.seed, o.cases);
  bool ok = true;
  for (const auto& r : reports) {
    const bool good = r.expect_failure ? !r.within() : r.within();
    ok = ok && good;
    out << r.line() << "\n";
  }
  out << (ok ? "verify-ops: all checks passed\n" : "verify-ops: FAILED\n");
  return ok ? kExitOk : kExitFailure;
}

int cmd_plan(const PlanOpts& o, std::ostream& out) {
  const ModelGraph g = load_model_config(o.model);
  const ModelWeights w = init_weights(g, o.seed);
  const CostModel costs = o.costs.empty() ? measured_costs(g, w, o.seed) : load_cost_file(o.costs, g.size());
  LinkModel link;
  link.bandwidth = o.bandwidth;
  link.latency = o.latency;
  link.validate();
  out << fmt::format("model {} ({} layers, {} params), M={}, costs: {}\n", g.name, g.size(),
                     g.param_count(), o.microbatches, o.costs.empty() ? "measured" : o.costs);
  out << fmt::format("{:>4} {:>14} {:>16}\n", "cut", "act_bytes", "makespan_s");
  for (const auto& c : evaluate_cuts(g, costs, link, o.microbatches)) {
    out << fmt::format("{:>4} {:>14} {:>16.6f}\n", c.cut, c.activation_bytes, c.makespan);
  }
  const PartitionSpec spec = plan_split(g, costs, link, o.microbatches);
  const double serial = static_cast<double>(o.microbatches) * costs.stage_seconds(0, g.size());
  const double best = predict_makespan(g, spec, costs, link, o.microbatches);
  out << fmt::format("chosen cut: {}  activation {}  predicted makespan {:.6f} s  (serial {:.6f} s)\n",
                     spec.cut_index, shape_str(spec.cut_activation), best, serial);
  return kExitOk;
}

int cmd_thermal(const ThermalOpts& o, std::ostream& out) {
  const ThermalConfig cfg = o.config.empty() ? ThermalConfig{} : load_thermal_config(o.config);
  const ThermalScenario sc =
      o.scenario.empty() ? ThermalScenario{} : parse_thermal_scenario(read_text_file(o.scenario));
  out << fmt::format("{:>5} {:>10} {:>9} {:>11}\n", "batch", "seconds", "heat", "state");
  for (const auto& b : run_thermal_scenario(cfg, sc)) {
    out << fmt::format("{:>5} {:>10.4f} {:>9.2f} {:>11}\n", b.batch, b.seconds, b.heat_after,
                       thermal_state_name(b.state));
  }
  return kExitOk;
}

// ---- parsing ------------------------------------------------------------------------

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

CLI::App* deepest_parsed(CLI::App* app) {
  for (CLI::App* sub : app->get_subcommands()) return deepest_parsed(sub);
  return app;
}

}  // namespace

std::string suggest(const std::string& word, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t best_d = std::numeric_limits<std::size_t>::max();
  for (const auto& c : candidates) {
    const std::size_t d = edit_distance(word, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best.empty() || best_d > std::max<std::size_t>(2, word.size() / 3)) return {};
  return best;
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"edgepipe: two-stage pipeline training across a host and a worker device",
               "edgepipe"};
  app.require_subcommand(1);

  HostOpts host_o;
  auto* host = app.add_subcommand("host", "Run the host (stage 0) against a worker");
  host->require_subcommand(1);
  const auto add_model_opts = [&](CLI::App* c, bool training) {
    c->add_option("--model", host_o.model, "Model config file")->required()->check(CLI::ExistingFile);
    c->add_option("--worker", host_o.worker, "Worker address host:port");
    c->add_option("--batches", host_o.batches, "Number of batches")->check(CLI::PositiveNumber);
    c->add_option("--microbatches", host_o.microbatches, "Microbatches per batch (M)")
        ->check(CLI::PositiveNumber);
    c->add_option("--mb-size", host_o.mb_size, "Rows per microbatch (default: the model's input batch)");
    if (training) c->add_option("--lr", host_o.lr, "SGD learning rate");
    c->add_option("--seed", host_o.seed, "Global seed");
    c->add_option("--split", host_o.split, "auto | index:<i>");
    c->add_option("--synthetic-costs", host_o.costs, "Cost file; replaces compute with sleeps")
        ->check(CLI::ExistingFile);
    c->add_option("--bandwidth", host_o.bandwidth, "Link bandwidth for --split auto (bytes/s)");
    c->add_option("--latency", host_o.latency, "Link latency for --split auto (s)");
    c->add_option("--trace", host_o.trace, "Write a JSONL trace");
    c->add_flag("--json", host_o.json, "Also print summaries as JSON lines");
  };
  auto* train = host->add_subcommand("train", "Pipelined training");
  add_model_opts(train, true);
  train->get_option("--worker")->required();
  auto* infer = host->add_subcommand("infer", "Pipelined batch inference");
  add_model_opts(infer, false);
  infer->get_option("--worker")->required();
  auto* bench = host->add_subcommand("bench", "Single-process baseline, then pipelined if --worker");
  add_model_opts(bench, true);
  bench->add_flag("--baseline", host_o.baseline_only, "Run only the single-process baseline");

  WorkerOpts worker_o;
  auto* worker = app.add_subcommand("worker", "Serve stage 1 and tools to one host at a time");
  worker->add_option("--listen", worker_o.listen, "Address to bind (port 0 picks a free port)");
  worker->add_option("--simulate-costs", worker_o.simulate_costs, "Cost file; sleep instead of compute")
      ->check(CLI::ExistingFile);
  worker->add_option("--thermal", worker_o.thermal, "Thermal config (key=value lines)")
      ->check(CLI::ExistingFile);
  worker->add_option("--max-bytes", worker_o.max_bytes, "Reject partitions needing more memory");
  worker->add_option("--trace", worker_o.trace, "Write a JSONL trace on exit");
  worker->add_option("--corpus", worker_o.corpus, "Embedding file for vector_search")
      ->check(CLI::ExistingFile);
  worker->add_option("--tool-capacity", worker_o.tool_capacity, "Pending tool call cap")
      ->check(CLI::PositiveNumber);

  auto* tools = app.add_subcommand("tools", "Split tool calls and the vector search tool");
  tools->require_subcommand(1);
  DemoOpts demo_o;
  auto* demo = tools->add_subcommand("demo", "Run a scripted agent against the tool broker");
  demo->add_option("--script", demo_o.script, "Agent script")->required()->check(CLI::ExistingFile);
  demo->add_option("--delay", demo_o.delay, "Injected vector_search delay (s)")
      ->check(CLI::NonNegativeNumber);
  demo->add_option("--worker", demo_o.worker, "Run tools on a worker instead of in-process");
  demo->add_option("--corpus", demo_o.corpus, "Embedding file (in-process mode)")
      ->check(CLI::ExistingFile);
  demo->add_option("--trace", demo_o.trace, "Write a JSONL trace");
  EmbedOpts embed_o;
  auto* embed = tools->add_subcommand("embed", "Build an embedding file from one text per line");
  embed->add_option("--in", embed_o.in, "Text file")->required()->check(CLI::ExistingFile);
  embed->add_option("--out", embed_o.out, "Output embedding file")->required();
  embed->add_option("--dim", embed_o.dim, "Embedding dimension")->check(CLI::PositiveNumber);

  auto* trace = app.add_subcommand("trace", "Render and analyze traces");
  trace->require_subcommand(1);
  RenderOpts render_o;
  auto* render = trace->add_subcommand("render", "Gantt chart of a trace");
  render->add_option("--in", render_o.in, "Trace JSONL")->required()->check(CLI::ExistingFile);
  render->add_option("--out", render_o.out, "SVG output (default: stdout)");
  render->add_option("--title", render_o.title, "Chart title");
  render->add_option("--width", render_o.width, "Plot width in pixels")->check(CLI::PositiveNumber);
  render->add_flag("--ascii", render_o.ascii, "Print an ASCII chart");
  AnalyzeOpts analyze_o;
  auto* analyze = trace->add_subcommand("analyze", "Per-batch statistics");
  auto* raw_opt = analyze->add_option("--raw", analyze_o.raw, "JSON object of series -> ms list")
                      ->check(CLI::ExistingFile);
  auto* trace_opt = analyze->add_option("--trace", analyze_o.trace, "Trace JSONL")
                        ->check(CLI::ExistingFile);
  raw_opt->excludes(trace_opt);
  analyze->add_option("--series", analyze_o.series, "Series to report (default: all)")
      ->needs(raw_opt);
  analyze->add_option("--baseline", analyze_o.baseline, "Series to compare against")
      ->needs(raw_opt);
  analyze->add_flag("--json", analyze_o.json, "Also print JSON lines with exact values");

  VerifyOpts verify_o;
  auto* verify = app.add_subcommand("verify-ops", "Cross-check every op against a naive version");
  verify->add_option("--cases", verify_o.cases, "Random cases per op")->check(CLI::PositiveNumber);
  verify->add_option("--seed", verify_o.seed, "Seed");

  PlanOpts plan_o;
  auto* plan = app.add_subcommand("plan", "Choose the split point");
  plan->add_option("--model", plan_o.model, "Model config file")->required()->check(CLI::ExistingFile);
  plan->add_option("--costs", plan_o.costs, "Cost file (default: measure on this machine)")
      ->check(CLI::ExistingFile);
  plan->add_option("--bandwidth", plan_o.bandwidth, "Link bandwidth (bytes/s)");
  plan->add_option("--latency", plan_o.latency, "Link latency (s)");
  plan->add_option("--microbatches", plan_o.microbatches, "Microbatches per batch (M)")
      ->check(CLI::PositiveNumber);
  plan->add_option("--seed", plan_o.seed, "Seed for measured costs");

  ThermalOpts thermal_o;
  auto* thermal = app.add_subcommand("thermal", "Simulate the worker's thermal model");
  thermal->add_option("--config", thermal_o.config, "Thermal config")->check(CLI::ExistingFile);
  thermal->add_option("--scenario", thermal_o.scenario, "Scenario file (batches, busy, idle)")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    CLI::App* at = deepest_parsed(&app);
    err << "error: " << e.what();
    {
      std::vector<std::string> names;
      for (const CLI::Option* opt : at->get_options()) {
        for (const auto& ln : opt->get_lnames()) names.push_back("--" + ln);
      }
      for (const auto* sub : at->get_subcommands({})) names.push_back(sub->get_name());
      for (const auto& extra : at->remaining()) {
        const std::string bare = extra.substr(0, extra.find('='));
        const std::string hint = suggest(bare, names);
        if (!hint.empty()) {
          err << " (did you mean " << hint << "?)";
          break;
        }
      }
    }
    err << "\n\n" << at->help();
    return kExitUsage;
  }

  try {
    if (train->parsed()) return cmd_host_train(host_o, out, err);
    if (infer->parsed()) return cmd_host_infer(host_o, out, err);
    if (bench->parsed()) return cmd_host_bench(host_o, out, err);
    if (worker->parsed()) return cmd_worker(worker_o, out, err);
    if (demo->parsed()) return cmd_tools_demo(demo_o, out, err);
    if (embed->parsed()) return cmd_tools_embed(embed_o, out);
    if (render->parsed()) return cmd_trace_render(render_o, out);
    if (analyze->parsed()) {
      if (analyze_o.raw.empty() && analyze_o.trace.empty()) {
        throw UsageError("trace analyze needs --raw or --trace");
      }
      return cmd_trace_analyze(analyze_o, out);
    }
    if (verify->parsed()) return cmd_verify(verify_o, out);
    if (plan->parsed()) return cmd_plan(plan_o, out);
    if (thermal->parsed()) return cmd_thermal(thermal_o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << " [" << errc_name(e.code()) << "]\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"edgepipe"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace edgepipe::cli
