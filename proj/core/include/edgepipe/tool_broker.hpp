// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The edgepipe Authors

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "edgepipe/tool_queue.hpp"
#include "edgepipe/trace.hpp"
#include "edgepipe/vector_index.hpp"

namespace edgepipe {

class WorkerClient;

inline constexpr const char* kVectorSearchTool = "vector_search";

// Registers `vector_search` (SearchArgs in, encode_hits out) on `queue`.
void register_vector_search(ToolQueue& queue, std::shared_ptr<const VectorIndex> index);

// Where begin/retrieve go: an in-process queue or a worker over the wire.
class ToolEndpoint {
 public:
  virtual ~ToolEndpoint() = default;
  virtual std::uint64_t begin(const std::string& tool, const Bytes& args) = 0;
  virtual ToolResult retrieve(std::optional<std::chrono::milliseconds> timeout) = 0;
  virtual void set_delay(const std::string& tool, double seconds) = 0;
};

class LocalToolEndpoint final : public ToolEndpoint {
 public:
  explicit LocalToolEndpoint(ToolQueue& queue) : queue_(queue) {}
  std::uint64_t begin(const std::string& tool, const Bytes& args) override;
  ToolResult retrieve(std::optional<std::chrono::milliseconds> timeout) override;
  void set_delay(const std::string& tool, double seconds) override;

 private:
  ToolQueue& queue_;
};

class RemoteToolEndpoint final : public ToolEndpoint {
 public:
  explicit RemoteToolEndpoint(WorkerClient& client) : client_(client) {}
  std::uint64_t begin(const std::string& tool, const Bytes& args) override;
  ToolResult retrieve(std::optional<std::chrono::milliseconds> timeout) override;
  void set_delay(const std::string& tool, double seconds) override;

 private:
  WorkerClient& client_;
};

struct ToolTicket {
  std::uint64_t id = 0;
  std::string tool;
  std::string args_digest;  // 16 hex digits of FNV-1a over the argument bytes
  std::int64_t enqueued_us = 0;
};

std::string args_digest(std::span<const std::uint8_t> args);

// Client side of the split tool protocol, for a single agent lane.
class ToolBroker {
 public:
  explicit ToolBroker(ToolEndpoint& endpoint) : endpoint_(endpoint) {}

  ToolTicket begin_tool(const std::string& tool, const Bytes& args);
  // nullopt blocks until the oldest pending result is ready.
  ToolResult retrieve_result(std::optional<std::chrono::milliseconds> timeout = std::nullopt);
  void inject_delay(const std::string& tool, double seconds);

  const std::vector<ToolTicket>& issued() const noexcept { return issued_; }

 private:
  ToolEndpoint& endpoint_;
  std::vector<ToolTicket> issued_;
};

struct AgentStep {
  enum class Kind { kBegin, kRetrieve, kThink };
  Kind kind = Kind::kThink;
  std::string query;       // kBegin
  std::uint32_t k = 1;     // kBegin
  double seconds = 0.0;    // kThink
  std::string label;
};

struct AgentScript {
  std::vector<AgentStep> steps;

  // Throws kInvalidArgument when some prefix retrieves more than it began.
  void validate() const;
};

// One step per line: `begin "<query>" k=<k>`, `retrieve`, or
// `think <seconds> "<label>"`. Blank lines and `#` comments are skipped.
AgentScript parse_agent_script(std::string_view text);
AgentScript load_agent_script(const std::filesystem::path& path);

struct TimelineEntry {
  AgentStep step;
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  double blocked_s = 0.0;        // kRetrieve: time spent waiting
  std::uint64_t ticket = 0;      // kBegin / kRetrieve
  std::optional<ToolResult> result;
};

struct Timeline {
  std::vector<TimelineEntry> entries;
  double total_s = 0.0;
  double blocked_s = 0.0;       // sum over retrieves
  double think_s = 0.0;         // measured
  double tool_exec_s = 0.0;     // sum of worker-side end - start
  // The same script with every tool call run inline: all measured step
  // durations plus every tool's execution time.
  double serialized_baseline_s = 0.0;
};

Timeline run_agent_script(const AgentScript& script, ToolBroker& broker,
                          TraceRecorder* trace = nullptr,
                          const std::string& tool = kVectorSearchTool);

}  // namespace edgepipe
