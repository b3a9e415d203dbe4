#include "swarmloop/gateway/gateway.hpp"

#include "swarmloop/wot/things.hpp"

#include <algorithm>
#include <cmath>

namespace swarmloop::gateway {

namespace {

wot::FieldSpec field(wot::FieldType type, bool required = true) {
  wot::FieldSpec f;
  f.type = type;
  f.required = required;
  return f;
}

const char* kDroneActions[] = {"arm", "disarm", "takeoff", "goto", "land", "rtl", "set_mode"};

bool is_drone_action(const std::string& name) {
  return std::find(std::begin(kDroneActions), std::end(kDroneActions), name) !=
         std::end(kDroneActions);
}

}  // namespace

std::string to_string(ToolCategory c) {
  switch (c) {
    case ToolCategory::core: return "core";
    case ToolCategory::planning: return "planning";
    case ToolCategory::helper: return "helper";
  }
  return "core";
}

std::string to_string(CallSource s) {
  switch (s) {
    case CallSource::agent: return "agent";
    case CallSource::helper: return "helper";
    case CallSource::external: return "external";
  }
  return "agent";
}

json ToolDefinition::to_json() const {
  return json{{"name", name},
              {"description", description},
              {"category", to_string(category)},
              {"input_schema", input_schema.to_json()},
              {"output_schema", output_schema.to_json()}};
}

json ToolCall::to_json() const {
  return json{{"call_id", call_id}, {"tool", tool}, {"arguments", arguments}};
}

ToolCall ToolCall::from_json(const json& j) {
  ToolCall c;
  c.call_id = j.at("call_id").get<std::string>();
  c.tool = j.at("tool").get<std::string>();
  c.arguments = j.value("arguments", json::object());
  return c;
}

json ToolResult::to_json() const {
  json j{{"call_id", call_id}, {"status", status}, {"payload", payload}};
  if (error_code) j["error_code"] = *error_code;
  if (error_detail) j["error_detail"] = *error_detail;
  return j;
}

ToolResult ToolResult::from_json(const json& j) {
  ToolResult r;
  r.call_id = j.at("call_id").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.payload = j.value("payload", json::object());
  if (j.contains("error_code")) r.error_code = j.at("error_code").get<std::string>();
  if (j.contains("error_detail")) r.error_detail = j.at("error_detail").get<std::string>();
  return r;
}

ToolResult ToolResult::success(const std::string& call_id, json payload) {
  ToolResult r;
  r.call_id = call_id;
  r.status = "ok";
  r.payload = std::move(payload);
  return r;
}

ToolResult ToolResult::failure(const std::string& call_id, const std::string& code,
                               const std::string& detail, json payload) {
  ToolResult r;
  r.call_id = call_id;
  r.status = "error";
  r.payload = std::move(payload);
  r.error_code = code;
  r.error_detail = detail;
  return r;
}

Gateway::Gateway(GatewayConfig config, sim::World& world, wot::Servient& servient,
                 directory::Directory& directory)
    : config_(config), world_(world), servient_(servient), directory_(directory) {
  build_tool_table();
  // Make completion observable through ordinary property reads: every Thing's
  // action_status property reports the most recent call issued here.
  for (const auto& id : servient_.thing_ids()) {
    servient_.bind_property(id, "action_status",
                            [this, id] { return last_status_for_thing(id); });
  }
}

void Gateway::build_tool_table() {
  using wot::FieldType;

  {
    ToolDefinition t;
    t.name = "list_web_things";
    t.description =
        "Discover WoT Things registered in the Thing Description Directory. "
        "Optional `query` filters with a path expression; `full` returns whole "
        "Thing Descriptions instead of id/title/thing_class summaries.";
    t.category = ToolCategory::core;
    t.input_schema.fields["query"] = field(FieldType::string, false);
    t.input_schema.fields["full"] = field(FieldType::boolean, false);
    t.output_schema.fields["things"] = field(FieldType::array);
    t.output_schema.fields["things"].item_type = FieldType::object;
    tools_.push_back(std::move(t));
  }
  {
    ToolDefinition t;
    t.name = "read_web_thing_property";
    t.description = "Read telemetry and state properties (e.g., position, mode, battery).";
    t.category = ToolCategory::core;
    t.input_schema.fields["thing"] = field(FieldType::string);
    t.input_schema.fields["property"] = field(FieldType::string);
    t.output_schema.fields["value"] = field(FieldType::any);
    tools_.push_back(std::move(t));
  }
  {
    ToolDefinition t;
    t.name = "write_web_thing_property";
    t.description = "Update configurable properties where supported.";
    t.category = ToolCategory::core;
    t.input_schema.fields["thing"] = field(FieldType::string);
    t.input_schema.fields["property"] = field(FieldType::string);
    t.input_schema.fields["value"] = field(FieldType::any);
    t.output_schema.fields["ok"] = field(FieldType::boolean);
    tools_.push_back(std::move(t));
  }
  {
    ToolDefinition t;
    t.name = "call_web_thing_action";
    t.description =
        "Invoke WoT actions on UAVs and sensors (e.g., navigation, sensing). "
        "Returns an acknowledgement; completion is observable via the Thing's "
        "action_status property.";
    t.category = ToolCategory::core;
    t.input_schema.fields["thing"] = field(FieldType::string);
    t.input_schema.fields["action"] = field(FieldType::string);
    t.input_schema.fields["input"] = field(FieldType::object, false);
    t.output_schema.fields["call_id"] = field(FieldType::string);
    t.output_schema.fields["state"] = field(FieldType::string);
    t.output_schema.fields["result"] = field(FieldType::object);
    tools_.push_back(std::move(t));
  }

  // Planning tools forward to the planner service Things and reuse the
  // schemas those TDs declare, so both surfaces stay identical.
  {
    const auto td = wot::build_service_td("planner-coverage");
    const auto& action = td.actions.at("plan_area_coverage");
    ToolDefinition t;
    t.name = "plan_area_coverage";
    t.description =
        "Generate coverage waypoints and altitude suggestions from region "
        "geometry and camera FOV.";
    t.category = ToolCategory::planning;
    t.input_schema = action.input;
    t.output_schema = action.output;
    tools_.push_back(std::move(t));
  }
  {
    const auto td = wot::build_service_td("planner-formation");
    const auto& action = td.actions.at("plan_drone_formation");
    ToolDefinition t;
    t.name = "plan_drone_formation";
    t.description =
        "Compute target positions for geometric formations (line, star, circle).";
    t.category = ToolCategory::planning;
    t.input_schema = action.input;
    t.output_schema = action.output;
    tools_.push_back(std::move(t));
  }

  {
    ToolDefinition t;
    t.name = "send_drones_to_positions";
    t.description = "Dispatch multiple navigation commands in a single call.";
    t.category = ToolCategory::helper;
    t.input_schema.fields["commands"] = field(FieldType::array);
    t.input_schema.fields["commands"].item_type = FieldType::object;
    t.output_schema.fields["results"] = field(FieldType::array);
    t.output_schema.fields["results"].item_type = FieldType::object;
    tools_.push_back(std::move(t));
  }
  for (const char* kind : {"armed", "arrived", "landed"}) {
    ToolDefinition t;
    t.name = std::string("wait_until_") + kind;
    t.description = "Verify execution progress via observed system state.";
    t.category = ToolCategory::helper;
    t.input_schema.fields["things"] = field(FieldType::array);
    t.input_schema.fields["things"].item_type = FieldType::string;
    t.input_schema.fields["timeout_s"] = field(FieldType::number, false);
    t.input_schema.fields["timeout_s"].minimum = 0.0;
    t.output_schema.fields["satisfied"] = field(FieldType::boolean);
    t.output_schema.fields["waited_s"] = field(FieldType::number);
    t.output_schema.fields["pending"] = field(FieldType::array);
    t.output_schema.fields["pending"].item_type = FieldType::string;
    tools_.push_back(std::move(t));
  }
}

bool Gateway::tool_active(const ToolDefinition& def) const {
  switch (def.category) {
    case ToolCategory::core: return true;
    case ToolCategory::planning: return config_.planning_tools;
    case ToolCategory::helper: return config_.helper_tools;
  }
  return false;
}

std::vector<ToolDefinition> Gateway::list_tools() const {
  std::vector<ToolDefinition> out;
  for (const auto& def : tools_)
    if (tool_active(def)) out.push_back(def);
  return out;
}

bool Gateway::has_tool(const std::string& name) const {
  for (const auto& def : tools_)
    if (def.name == name && tool_active(def)) return true;
  return false;
}

ToolResult Gateway::call_tool(const ToolCall& call, CallSource source) {
  ToolResult result;
  try {
    const ToolDefinition* def = nullptr;
    for (const auto& d : tools_)
      if (d.name == call.tool && tool_active(d)) def = &d;
    if (!def)
      throw DomainError("UnknownTool", "no such tool: " + call.tool,
                        json{{"tool", call.tool}});
    if (!call.arguments.is_object())
      throw wot::schema_violation("arguments", "must be an object");
    def->input_schema.validate(call.arguments);

    json payload = dispatch(call, source);
    def->output_schema.validate(payload);  // self-conformance before truncation

    const std::string dumped = payload.dump();
    if (dumped.size() > config_.payload_cap_bytes) {
      payload = json{{"truncated", true},
                     {"bytes", dumped.size()},
                     {"preview", dumped.substr(0, std::min<std::size_t>(
                                                    1024, config_.payload_cap_bytes))}};
    }
    result = ToolResult::success(call.call_id, std::move(payload));
  } catch (const DomainError& e) {
    result = ToolResult::failure(call.call_id, e.code(), e.what(), e.detail());
  } catch (const std::exception& e) {
    // Safety net; the fuzz suite asserts this code never actually appears.
    result = ToolResult::failure(call.call_id, "InternalError", e.what());
  }
  append_log(source, call, result);
  return result;
}

json Gateway::dispatch(const ToolCall& call, CallSource source) {
  (void)source;
  if (call.tool == "list_web_things") return tool_list_web_things(call.arguments);
  if (call.tool == "read_web_thing_property") return tool_read_property(call.arguments);
  if (call.tool == "write_web_thing_property") return tool_write_property(call.arguments);
  if (call.tool == "call_web_thing_action")
    return tool_call_action(call.arguments, call.call_id);
  if (call.tool == "plan_area_coverage")
    return tool_plan("planner-coverage", "plan_area_coverage", call.arguments);
  if (call.tool == "plan_drone_formation")
    return tool_plan("planner-formation", "plan_drone_formation", call.arguments);
  if (call.tool == "send_drones_to_positions")
    return tool_send_drones(call.arguments, call.call_id);
  if (call.tool == "wait_until_armed") return tool_wait_until("armed", call.arguments);
  if (call.tool == "wait_until_arrived") return tool_wait_until("arrived", call.arguments);
  if (call.tool == "wait_until_landed") return tool_wait_until("landed", call.arguments);
  throw DomainError("UnknownTool", "no such tool: " + call.tool, json{{"tool", call.tool}});
}

json Gateway::tool_list_web_things(const json& args) const {
  const auto docs = args.contains("query")
                        ? directory_.query(args.at("query").get<std::string>())
                        : directory_.list();
  const bool full = args.value("full", false);
  json things = json::array();
  for (const auto& doc : docs) {
    if (full) {
      things.push_back(doc);
    } else {
      things.push_back(json{{"id", doc.value("id", "")},
                            {"title", doc.value("title", "")},
                            {"thing_class", doc.value("thing_class", "")}});
    }
  }
  return json{{"things", std::move(things)}};
}

json Gateway::tool_read_property(const json& args) {
  const auto value = servient_.invoke_affordance(args.at("thing").get<std::string>(),
                                                 wot::AffordanceKind::property_read,
                                                 args.at("property").get<std::string>());
  return json{{"value", value}};
}

json Gateway::tool_write_property(const json& args) {
  servient_.invoke_affordance(args.at("thing").get<std::string>(),
                              wot::AffordanceKind::property_write,
                              args.at("property").get<std::string>(), args.at("value"));
  return json{{"ok", true}};
}

json Gateway::tool_call_action(const json& args, const std::string& call_id) {
  const auto thing = args.at("thing").get<std::string>();
  const auto action = args.at("action").get<std::string>();
  const json input = args.value("input", json::object());

  {
    std::lock_guard<std::mutex> lock(mu_);
    if (records_.count(call_id) != 0)
      throw DomainError("DuplicateCallId", "call_id already used: " + call_id,
                        json{{"call_id", call_id}});
    CallRecord rec;
    rec.call_id = call_id;
    rec.thing = thing;
    rec.action = action;
    rec.input = input;
    rec.issued_at = world_.sim_time();
    records_[call_id] = std::move(rec);
    latest_call_[thing] = call_id;
  }

  json result;
  try {
    result = servient_.invoke_affordance(thing, wot::AffordanceKind::action, action, input);
  } catch (const DomainError& e) {
    std::lock_guard<std::mutex> lock(mu_);
    auto& rec = records_.at(call_id);
    rec.state = "failed";
    rec.detail = json{{"error_code", e.code()}, {"message", e.what()}};
    throw;
  }
  return json{{"call_id", call_id}, {"state", "accepted"}, {"result", result}};
}

json Gateway::tool_plan(const std::string& service, const std::string& action,
                        const json& args) {
  return servient_.invoke_affordance(service, wot::AffordanceKind::action, action, args);
}

json Gateway::tool_send_drones(const json& args, const std::string& call_id) {
  json results = json::array();
  std::size_t i = 0;
  for (const auto& cmd : args.at("commands")) {
    const std::string where = "commands[" + std::to_string(i) + "]";
    if (!cmd.is_object() || !cmd.contains("thing") || !cmd.at("thing").is_string())
      throw wot::schema_violation(where + ".thing", "required string");
    for (const char* key : {"x", "y", "alt"}) {
      if (!cmd.contains(key) || !cmd.at(key).is_number())
        throw wot::schema_violation(where + "." + key, "required number");
    }

    ToolCall sub;
    sub.call_id = call_id + "/" + std::to_string(i);
    sub.tool = "call_web_thing_action";
    sub.arguments = json{{"thing", cmd.at("thing")},
                         {"action", "goto"},
                         {"input", json{{"x", cmd.at("x")}, {"y", cmd.at("y")},
                                        {"alt", cmd.at("alt")}}}};
    const auto res = call_tool(sub, CallSource::helper);
    json entry{{"thing", cmd.at("thing")}, {"call_id", sub.call_id}, {"status", res.status}};
    if (res.error_code) entry["error_code"] = *res.error_code;
    results.push_back(std::move(entry));
    ++i;
  }
  return json{{"results", std::move(results)}};
}

json Gateway::tool_wait_until(const std::string& kind, const json& args) {
  std::vector<std::string> things;
  for (const auto& t : args.at("things")) things.push_back(t.get<std::string>());
  const double timeout = std::min(args.value("timeout_s", config_.wait_timeout_default_s),
                                  config_.wait_timeout_max_s);

  auto satisfied_for = [&](const std::string& id) {
    const auto d = world_.drone(id);  // throws UnknownDrone for non-drones
    if (kind == "armed") return d.armed;
    if (kind == "landed") return !d.armed && !d.airborne;
    // arrived: nothing outstanding, or within tolerance of the target
    if (!d.target) return true;
    return distance3(d.position, *d.target) <= world_.config().arrival_tol;
  };

  double waited = 0.0;
  json pending = json::array();
  while (true) {
    pending = json::array();
    for (const auto& id : things)
      if (!satisfied_for(id)) pending.push_back(id);
    if (pending.empty() || waited >= timeout) break;
    const double step = std::min(config_.wait_poll_s, timeout - waited);
    world_.advance(step);
    waited += step;
  }
  return json{{"satisfied", pending.empty()}, {"waited_s", waited}, {"pending", pending}};
}

void Gateway::refresh_record(CallRecord& rec) const {
  if (rec.state == "completed" || rec.state == "failed") return;
  if (!is_drone_action(rec.action)) {
    // Sensing, actuation, and planner runs take effect synchronously.
    rec.state = "completed";
    return;
  }

  sim::DroneState d;
  try {
    d = world_.drone(rec.thing);
  } catch (const DomainError&) {
    rec.state = "failed";
    rec.detail = json{{"reason", "thing no longer resolvable"}};
    return;
  }

  const double tol = world_.config().arrival_tol;
  bool done = false;
  bool failed = false;
  if (rec.action == "arm") {
    done = d.armed;
    rec.detail = json{{"armed", d.armed}};
  } else if (rec.action == "disarm") {
    done = !d.armed;
    rec.detail = json{{"armed", d.armed}};
  } else if (rec.action == "set_mode") {
    const auto mode = sim::to_string(d.mode);
    done = mode == rec.input.value("mode", "");
    rec.detail = json{{"mode", mode}};
  } else if (rec.action == "takeoff") {
    const double alt = rec.input.value("alt", 0.0);
    done = d.airborne && std::abs(d.position.z - alt) <= tol;
    failed = !done && !d.armed;
    rec.detail = json{{"alt", d.position.z}};
  } else if (rec.action == "goto") {
    const Vec3 target{rec.input.value("x", 0.0), rec.input.value("y", 0.0),
                      rec.input.value("alt", 0.0)};
    const double dist = distance3(d.position, target);
    done = dist <= tol;
    failed = !done && !d.airborne;  // grounded short of the target
    rec.detail = json{{"distance_m", dist}};
  } else {  // land, rtl: complete once disarmed on the ground
    done = !d.armed && !d.airborne;
    rec.detail = json{{"alt", d.position.z}, {"armed", d.armed}};
  }

  if (done) rec.state = "completed";
  else if (failed) rec.state = "failed";
  else if (world_.sim_time() > rec.issued_at) rec.state = "running";
}

json Gateway::action_status(const std::string& thing_id, const std::string& call_id) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = records_.find(call_id);
  if (it == records_.end() || it->second.thing != thing_id)
    throw DomainError("UnknownCall", "no call " + call_id + " issued for " + thing_id,
                      json{{"thing", thing_id}, {"call_id", call_id}});
  refresh_record(it->second);
  const auto& rec = it->second;
  return json{{"call_id", rec.call_id},
              {"action", rec.action},
              {"state", rec.state},
              {"detail", rec.detail}};
}

json Gateway::last_status_for_thing(const std::string& thing_id) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = latest_call_.find(thing_id);
  if (it == latest_call_.end()) return json{{"state", "idle"}};
  auto& rec = records_.at(it->second);
  refresh_record(rec);
  return json{{"call_id", rec.call_id},
              {"action", rec.action},
              {"state", rec.state},
              {"detail", rec.detail}};
}

void Gateway::advance_sim(double seconds) { world_.advance(seconds); }

double Gateway::sim_time() const { return world_.sim_time(); }

std::vector<GatewayLogEntry> Gateway::log() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

void Gateway::append_log(CallSource source, const ToolCall& call, const ToolResult& result) {
  std::lock_guard<std::mutex> lock(mu_);
  GatewayLogEntry entry;
  entry.seq = seq_++;
  entry.sim_time = world_.sim_time();
  entry.source = source;
  entry.call = call.to_json();
  entry.result = result.to_json();
  log_.push_back(std::move(entry));
}

}  // namespace swarmloop::gateway
