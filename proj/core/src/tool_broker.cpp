// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#include "edgepipe/tool_broker.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "edgepipe/error.hpp"
#include "edgepipe/model_graph.hpp"
#include "edgepipe/worker_client.hpp"

namespace edgepipe {

void register_vector_search(ToolQueue& queue, std::shared_ptr<const VectorIndex> index) {
  queue.register_tool(kVectorSearchTool, [index](const Bytes& raw) {
    const SearchArgs args = SearchArgs::decode(raw);
    const auto q = embed_text(args.query, index->dim());
    return encode_hits(vector_search(*index, q, args.k));
  });
}

std::uint64_t LocalToolEndpoint::begin(const std::string& tool, const Bytes& args) {
  return queue_.begin(tool, args);
}

ToolResult LocalToolEndpoint::retrieve(std::optional<std::chrono::milliseconds> timeout) {
  return queue_.retrieve(timeout);
}

void LocalToolEndpoint::set_delay(const std::string& tool, double seconds) {
  queue_.set_delay(tool, seconds);
}

std::uint64_t RemoteToolEndpoint::begin(const std::string& tool, const Bytes& args) {
  return client_.tool_begin(tool, args);
}

ToolResult RemoteToolEndpoint::retrieve(std::optional<std::chrono::milliseconds> timeout) {
  return client_.tool_retrieve(timeout);
}

void RemoteToolEndpoint::set_delay(const std::string& tool, double seconds) {
  client_.tool_set_delay(tool, seconds);
}

std::string args_digest(std::span<const std::uint8_t> args) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : args) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

ToolTicket ToolBroker::begin_tool(const std::string& tool, const Bytes& args) {
  ToolTicket t;
  t.tool = tool;
  t.args_digest = args_digest(args);
  t.enqueued_us = now_us();
  t.id = endpoint_.begin(tool, args);
  if (!issued_.empty() && t.id <= issued_.back().id && t.id != 1) {
    fail(Errc::kProtocol,
         fmt::format("ticket id {} does not follow {}", t.id, issued_.back().id));
  }
  issued_.push_back(t);
  return t;
}

ToolResult ToolBroker::retrieve_result(std::optional<std::chrono::milliseconds> timeout) {
  return endpoint_.retrieve(timeout);
}

void ToolBroker::inject_delay(const std::string& tool, double seconds) {
  endpoint_.set_delay(tool, seconds);
}

// ---- scripts ----------------------------------------------------------------

void AgentScript::validate() const {
  std::size_t begun = 0, retrieved = 0;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    if (s.kind == AgentStep::Kind::kBegin) ++begun;
    if (s.kind == AgentStep::Kind::kRetrieve && ++retrieved > begun) {
      fail(Errc::kInvalidArgument,
           fmt::format("step {}: retrieve without a pending begin", i + 1));
    }
    if (s.kind == AgentStep::Kind::kThink && !(std::isfinite(s.seconds) && s.seconds >= 0.0)) {
      fail(Errc::kInvalidArgument, fmt::format("step {}: think duration must be >= 0", i + 1));
    }
    if (s.kind == AgentStep::Kind::kBegin && s.k == 0) {
      fail(Errc::kInvalidArgument, fmt::format("step {}: k must be >= 1", i + 1));
    }
  }
}

namespace {

// Splits on whitespace; double-quoted runs (with \" escapes) form one word.
std::vector<std::string> split_words(std::string_view line, std::size_t lineno) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    std::string w;
    if (line[i] == '"') {
      ++i;
      bool closed = false;
      while (i < line.size()) {
        if (line[i] == '\\' && i + 1 < line.size()) {
          w += line[i + 1];
          i += 2;
        } else if (line[i] == '"') {
          ++i;
          closed = true;
          break;
        } else {
          w += line[i++];
        }
      }
      if (!closed) fail(Errc::kParse, fmt::format("line {}: unterminated quote", lineno));
    } else {
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) w += line[i++];
    }
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

AgentScript parse_agent_script(std::string_view text) {
  AgentScript script;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto words = split_words(line, lineno);
    AgentStep step;
    const std::string& verb = words[0];
    try {
      if (verb == "begin") {
        if (words.size() < 2 || words.size() > 3) {
          fail(Errc::kParse, "expected: begin \"<query>\" k=<k>");
        }
        step.kind = AgentStep::Kind::kBegin;
        step.query = words[1];
        if (words.size() == 3) {
          if (words[2].rfind("k=", 0) != 0) fail(Errc::kParse, "expected k=<k>");
          step.k = static_cast<std::uint32_t>(std::stoul(words[2].substr(2)));
        }
        step.label = "begin " + step.query;
      } else if (verb == "retrieve") {
        if (words.size() != 1) fail(Errc::kParse, "retrieve takes no arguments");
        step.kind = AgentStep::Kind::kRetrieve;
        step.label = "retrieve";
      } else if (verb == "think") {
        if (words.size() < 2 || words.size() > 3) {
          fail(Errc::kParse, "expected: think <seconds> \"<label>\"");
        }
        step.kind = AgentStep::Kind::kThink;
        std::size_t used = 0;
        step.seconds = std::stod(words[1], &used);
        if (used != words[1].size()) fail(Errc::kParse, "bad duration '" + words[1] + "'");
        step.label = words.size() == 3 ? words[2] : "think";
      } else {
        fail(Errc::kParse, "unknown step '" + verb + "'");
      }
    } catch (const Error& e) {
      fail(Errc::kParse, fmt::format("line {}: {}", lineno, e.what()));
    } catch (const std::exception&) {
      fail(Errc::kParse, fmt::format("line {}: bad number", lineno));
    }
    script.steps.push_back(std::move(step));
  }
  script.validate();
  return script;
}

AgentScript load_agent_script(const std::filesystem::path& path) {
  return parse_agent_script(read_text_file(path));
}

Timeline run_agent_script(const AgentScript& script, ToolBroker& broker, TraceRecorder* trace,
                          const std::string& tool) {
  script.validate();
  Timeline tl;
  const std::int64_t t0 = now_us();
  for (const auto& step : script.steps) {
    TimelineEntry e;
    e.step = step;
    e.start_us = now_us();
    switch (step.kind) {
      case AgentStep::Kind::kBegin: {
        const SearchArgs args{step.k, step.query};
        e.ticket = broker.begin_tool(tool, args.encode()).id;
        e.end_us = now_us();
        break;
      }
      case AgentStep::Kind::kRetrieve: {
        ToolResult r = broker.retrieve_result(std::nullopt);
        e.end_us = now_us();
        e.ticket = r.ticket;
        e.blocked_s = static_cast<double>(e.end_us - e.start_us) / 1e6;
        tl.blocked_s += e.blocked_s;
        tl.tool_exec_s += static_cast<double>(r.end_us - r.start_us) / 1e6;
        if (trace) {
          trace->record({e.start_us, e.end_us, Device::kAgent, TraceKind::kRetrieveWait, 0,
                         static_cast<std::uint32_t>(r.ticket), fmt::format("wait #{}", r.ticket)});
          trace->record({r.start_us, r.end_us, Device::kTool, TraceKind::kToolExec, 0,
                         static_cast<std::uint32_t>(r.ticket),
                         fmt::format("{} #{}", r.tool, r.ticket)});
        }
        e.result = std::move(r);
        break;
      }
      case AgentStep::Kind::kThink: {
        std::this_thread::sleep_for(std::chrono::duration<double>(step.seconds));
        e.end_us = now_us();
        tl.think_s += static_cast<double>(e.end_us - e.start_us) / 1e6;
        if (trace) {
          trace->record(
              {e.start_us, e.end_us, Device::kAgent, TraceKind::kThink, 0, 0, step.label});
        }
        break;
      }
    }
    tl.entries.push_back(std::move(e));
  }
  tl.total_s = static_cast<double>(now_us() - t0) / 1e6;
  tl.serialized_baseline_s = tl.total_s - tl.blocked_s + tl.tool_exec_s;
  return tl;
}

}  // namespace edgepipe
