#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "swarmloop/directory/directory.hpp"
#include "swarmloop/sim/world.hpp"
#include "swarmloop/wot/schema.hpp"
#include "swarmloop/wot/servient.hpp"

namespace swarmloop::gateway {

enum class ToolCategory { core, planning, helper };

std::string to_string(ToolCategory c);

struct ToolDefinition {
  std::string name;
  std::string description;
  wot::Schema input_schema;
  wot::Schema output_schema;
  ToolCategory category = ToolCategory::core;

  json to_json() const;
};

struct ToolCall {
  std::string call_id;
  std::string tool;
  json arguments = json::object();

  json to_json() const;
  static ToolCall from_json(const json& j);
};

struct ToolResult {
  std::string call_id;
  std::string status;  // "ok" | "error"; error_code present iff "error"
  json payload = json::object();
  std::optional<std::string> error_code;
  std::optional<std::string> error_detail;

  bool ok() const { return status == "ok"; }
  json to_json() const;
  static ToolResult from_json(const json& j);

  static ToolResult success(const std::string& call_id, json payload);
  static ToolResult failure(const std::string& call_id, const std::string& code,
                            const std::string& detail, json payload = json::object());
};

/// Who issued a call; helper fan-out sub-calls are tagged so audits can
/// separate agent-initiated traffic from internal plumbing.
enum class CallSource { agent, helper, external };

std::string to_string(CallSource s);

struct GatewayConfig {
  bool planning_tools = false;
  bool helper_tools = false;
  std::size_t payload_cap_bytes = 16 * 1024;
  double wait_poll_s = 1.0;          // sim-time cadence of wait_until polling
  double wait_timeout_default_s = 60.0;
  double wait_timeout_max_s = 300.0;  // requested timeouts are clamped to this
};

struct GatewayLogEntry {
  std::int64_t seq = 0;
  double sim_time = 0.0;
  CallSource source = CallSource::agent;
  json call;    // ToolCall serialization
  json result;  // ToolResult serialization
};

/// The agent's only bridge to the world: typed tools over the servient and
/// the directory, with acknowledgement/completion split for thing actions.
///
/// Every call_web_thing_action gets a status record that advances through
/// accepted -> running -> {completed, failed} and never regresses. Each
/// Thing's `action_status` property is rebound at construction to report the
/// most recent call on that Thing, so completion is observable through an
/// ordinary property read.
class Gateway {
public:
  Gateway(GatewayConfig config, sim::World& world, wot::Servient& servient,
          directory::Directory& directory);

  /// Tools visible under the active config, ordered core, planning, helper.
  std::vector<ToolDefinition> list_tools() const;

  bool has_tool(const std::string& name) const;  // under the active config

  /// Total: every failure comes back as a ToolResult with status "error".
  ToolResult call_tool(const ToolCall& call, CallSource source = CallSource::agent);

  /// Status of one acknowledged action call. Throws UnknownCall when the
  /// call_id was never issued here or belongs to a different Thing.
  json action_status(const std::string& thing_id, const std::string& call_id);

  /// Most recent action call on the Thing, {"state":"idle"} if none yet.
  json last_status_for_thing(const std::string& thing_id);

  void advance_sim(double seconds);
  double sim_time() const;

  const GatewayConfig& config() const { return config_; }
  std::vector<GatewayLogEntry> log() const;

private:
  struct CallRecord {
    std::string call_id;
    std::string thing;
    std::string action;
    json input;
    double issued_at = 0.0;
    std::string state = "accepted";
    json detail = json::object();
  };

  void build_tool_table();
  bool tool_active(const ToolDefinition& def) const;
  json dispatch(const ToolCall& call, CallSource source);

  json tool_list_web_things(const json& args) const;
  json tool_read_property(const json& args);
  json tool_write_property(const json& args);
  json tool_call_action(const json& args, const std::string& call_id);
  json tool_plan(const std::string& service, const std::string& action, const json& args);
  json tool_send_drones(const json& args, const std::string& call_id);
  json tool_wait_until(const std::string& kind, const json& args);

  void refresh_record(CallRecord& rec) const;  // world reads only, no lock needed
  void append_log(CallSource source, const ToolCall& call, const ToolResult& result);

  GatewayConfig config_;
  sim::World& world_;
  wot::Servient& servient_;
  directory::Directory& directory_;

  std::vector<ToolDefinition> tools_;  // fixed after construction

  mutable std::mutex mu_;
  std::map<std::string, CallRecord> records_;        // by call_id
  std::map<std::string, std::string> latest_call_;   // thing id -> call_id
  std::vector<GatewayLogEntry> log_;
  std::int64_t seq_ = 0;
};

}  // namespace swarmloop::gateway
