#include "swarmloop/agent/agent.hpp"

#include <algorithm>
#include <set>

namespace swarmloop::agent {

std::string to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    case Role::tool: return "tool";
  }
  return "?";
}

Role role_from_string(const std::string& s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  if (s == "tool") return Role::tool;
  throw DomainError("UnknownRole", "no message role named " + s);
}

json Message::to_json() const {
  json j{{"role", to_string(role)}, {"content", content}};
  if (!tool_calls.empty()) {
    json calls = json::array();
    for (const auto& c : tool_calls) calls.push_back(c.to_json());
    j["tool_calls"] = std::move(calls);
  }
  if (call_id) j["call_id"] = *call_id;
  return j;
}

Message Message::from_json(const json& j) {
  Message m;
  m.role = role_from_string(j.at("role").get<std::string>());
  m.content = j.at("content").get<std::string>();
  if (j.contains("tool_calls"))
    for (const auto& c : j.at("tool_calls")) m.tool_calls.push_back(gateway::ToolCall::from_json(c));
  if (j.contains("call_id")) m.call_id = j.at("call_id").get<std::string>();
  return m;
}

std::string prompt_token_text(const Message& m) {
  std::string text = m.content;
  for (const auto& c : m.tool_calls) text += c.to_json().dump();
  return text;
}

std::int64_t estimate_tokens(const std::string& text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

json AgentContext::to_json() const {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back(m.to_json());
  json injected = json::object();
  for (const auto& [id, n] : injected_guardrails) injected[to_string(id)] = n;
  return json{{"messages", std::move(msgs)},
              {"iteration", iteration},
              {"injected_guardrails", std::move(injected)}};
}

json ReasonerStep::to_json() const {
  json calls = json::array();
  for (const auto& c : tool_calls) calls.push_back(c.to_json());
  json j{{"tool_calls", std::move(calls)},
         {"usage", json{{"prompt_tokens", usage.prompt_tokens},
                        {"completion_tokens", usage.completion_tokens},
                        {"provided", usage.provided}}}};
  if (final_text) j["final_text"] = *final_text;
  if (!malformed.empty()) {
    json bad = json::array();
    for (const auto& mc : malformed)
      bad.push_back(json{{"call_id", mc.call_id}, {"tool", mc.tool}, {"raw", mc.raw}});
    j["malformed"] = std::move(bad);
  }
  return j;
}

ReasonerStep ReasonerStep::from_json(const json& j) {
  ReasonerStep s;
  for (const auto& c : j.at("tool_calls")) s.tool_calls.push_back(gateway::ToolCall::from_json(c));
  if (j.contains("malformed"))
    for (const auto& mc : j.at("malformed"))
      s.malformed.push_back({mc.at("call_id").get<std::string>(),
                             mc.at("tool").get<std::string>(), mc.at("raw").get<std::string>()});
  if (j.contains("final_text")) s.final_text = j.at("final_text").get<std::string>();
  const auto& u = j.at("usage");
  s.usage.prompt_tokens = u.at("prompt_tokens").get<std::int64_t>();
  s.usage.completion_tokens = u.at("completion_tokens").get<std::int64_t>();
  s.usage.provided = u.at("provided").get<bool>();
  return s;
}

json IterationTokens::to_json() const {
  json j{{"iteration", iteration},
         {"prompt_tokens", prompt_tokens},
         {"completion_tokens", completion_tokens},
         {"estimated", estimated}};
  if (prompt_components) {
    j["prompt_components"] = json{{"system", prompt_components->system},
                                  {"user", prompt_components->user},
                                  {"history", prompt_components->history},
                                  {"toolout", prompt_components->toolout}};
  }
  if (completion_components) {
    j["completion_components"] = json{{"text", completion_components->text},
                                      {"toolcall", completion_components->toolcall}};
  }
  return j;
}

IterationTokens IterationTokens::from_json(const json& j) {
  IterationTokens t;
  t.iteration = j.at("iteration").get<int>();
  t.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
  t.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
  t.estimated = j.at("estimated").get<bool>();
  if (j.contains("prompt_components")) {
    const auto& p = j.at("prompt_components");
    t.prompt_components = PromptComponents{
        p.at("system").get<std::int64_t>(), p.at("user").get<std::int64_t>(),
        p.at("history").get<std::int64_t>(), p.at("toolout").get<std::int64_t>()};
  }
  if (j.contains("completion_components")) {
    const auto& c = j.at("completion_components");
    t.completion_components = CompletionComponents{c.at("text").get<std::int64_t>(),
                                                   c.at("toolcall").get<std::int64_t>()};
  }
  return t;
}

std::int64_t TokenLedger::total_prompt() const {
  std::int64_t sum = 0;
  for (const auto& it : iterations) sum += it.prompt_tokens;
  return sum;
}

std::int64_t TokenLedger::total_completion() const {
  std::int64_t sum = 0;
  for (const auto& it : iterations) sum += it.completion_tokens;
  return sum;
}

std::int64_t TokenLedger::total() const { return total_prompt() + total_completion(); }

json TokenLedger::to_json() const {
  json its = json::array();
  for (const auto& it : iterations) its.push_back(it.to_json());
  return json{{"iterations", std::move(its)},
              {"total_prompt", total_prompt()},
              {"total_completion", total_completion()},
              {"total", total()}};
}

TokenLedger TokenLedger::from_json(const json& j) {
  TokenLedger ledger;
  for (const auto& it : j.at("iterations"))
    ledger.iterations.push_back(IterationTokens::from_json(it));
  return ledger;
}

void record_usage(TokenLedger& ledger, const ReasonerStep& step,
                  const std::vector<Message>& prompt_messages, const Reasoner& reasoner,
                  int iteration) {
  IterationTokens it;
  it.iteration = iteration;

  const bool have_counter = reasoner.count_tokens(std::string()).has_value();
  const auto count = [&](const std::string& text) -> std::int64_t {
    if (have_counter) return *reasoner.count_tokens(text);
    return estimate_tokens(text);
  };

  PromptComponents pc;
  for (const auto& m : prompt_messages) {
    const auto n = count(prompt_token_text(m));
    switch (m.role) {
      case Role::system: pc.system += n; break;
      case Role::user: pc.user += n; break;
      case Role::assistant: pc.history += n; break;
      case Role::tool: pc.toolout += n; break;
    }
  }
  CompletionComponents cc;
  cc.text = count(step.final_text.value_or(""));
  for (const auto& call : step.tool_calls) cc.toolcall += count(call.to_json().dump());
  for (const auto& mc : step.malformed) cc.toolcall += count(mc.raw);

  if (step.usage.provided) {
    it.prompt_tokens = step.usage.prompt_tokens;
    it.completion_tokens = step.usage.completion_tokens;
    // Components attach only when they reproduce the reported aggregate
    // exactly; otherwise the aggregate stands alone as unattributed.
    if (have_counter && pc.sum() == it.prompt_tokens) it.prompt_components = pc;
    if (have_counter && cc.sum() == it.completion_tokens) it.completion_components = cc;
  } else {
    it.prompt_tokens = pc.sum();
    it.completion_tokens = cc.sum();
    it.estimated = true;
  }
  ledger.iterations.push_back(it);
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::completed: return "completed";
    case Termination::infeasible: return "infeasible";
    case Termination::iteration_cap: return "iteration_cap";
    case Termination::error: return "error";
  }
  return "?";
}

Termination termination_from_string(const std::string& s) {
  if (s == "completed") return Termination::completed;
  if (s == "infeasible") return Termination::infeasible;
  if (s == "iteration_cap") return Termination::iteration_cap;
  if (s == "error") return Termination::error;
  throw DomainError("UnknownTermination", "no termination state named " + s);
}

json IterationRecord::to_json() const {
  json results_json = json::array();
  for (const auto& r : results) results_json.push_back(r.to_json());
  json injected_json = json::array();
  for (const auto g : injected) injected_json.push_back(to_string(g));
  return json{{"iteration", iteration},
              {"step", step.to_json()},
              {"results", std::move(results_json)},
              {"injected", std::move(injected_json)},
              {"sim_time_after", sim_time_after}};
}

IterationRecord IterationRecord::from_json(const json& j) {
  IterationRecord rec;
  rec.iteration = j.at("iteration").get<int>();
  rec.step = ReasonerStep::from_json(j.at("step"));
  for (const auto& r : j.at("results")) rec.results.push_back(gateway::ToolResult::from_json(r));
  for (const auto& g : j.at("injected"))
    rec.injected.push_back(guardrail_from_string(g.get<std::string>()));
  rec.sim_time_after = j.at("sim_time_after").get<double>();
  return rec;
}

json RunTrace::to_json() const {
  json its = json::array();
  for (const auto& rec : iterations) its.push_back(rec.to_json());
  json j{{"mission_id", mission_id},
         {"mission_kind", mission_kind},
         {"iterations", std::move(its)},
         {"tokens", tokens.to_json()},
         {"termination", to_string(termination)},
         {"sim_time_start", sim_time_start},
         {"sim_time_end", sim_time_end},
         {"plan", plan},
         {"plan_kind", plan_kind}};
  if (final_text) j["final_text"] = *final_text;
  if (note) j["note"] = *note;
  return j;
}

RunTrace RunTrace::from_json(const json& j) {
  RunTrace trace;
  trace.mission_id = j.at("mission_id").get<std::string>();
  trace.mission_kind = j.at("mission_kind").get<std::string>();
  for (const auto& rec : j.at("iterations"))
    trace.iterations.push_back(IterationRecord::from_json(rec));
  trace.tokens = TokenLedger::from_json(j.at("tokens"));
  trace.termination = termination_from_string(j.at("termination").get<std::string>());
  if (j.contains("final_text")) trace.final_text = j.at("final_text").get<std::string>();
  if (j.contains("note")) trace.note = j.at("note").get<std::string>();
  trace.sim_time_start = j.at("sim_time_start").get<double>();
  trace.sim_time_end = j.at("sim_time_end").get<double>();
  trace.plan = j.at("plan");
  trace.plan_kind = j.at("plan_kind").get<std::string>();
  return trace;
}

namespace {

// Canonical per-iteration form for stall comparison: the multiset of
// (tool, arguments) with their results, call ids excluded on both sides so
// that re-issuing the same request under a fresh id still counts as a repeat.
std::vector<std::string> iteration_signature(const IterationRecord& rec) {
  std::vector<std::string> entries;
  const auto& calls = rec.step.tool_calls;
  for (std::size_t i = 0; i < calls.size(); ++i) {
    json entry{{"tool", calls[i].tool}, {"arguments", calls[i].arguments}};
    if (i < rec.results.size()) {
      entry["status"] = rec.results[i].status;
      entry["payload"] = rec.results[i].payload;
      if (rec.results[i].error_code) entry["error_code"] = *rec.results[i].error_code;
    }
    entries.push_back(entry.dump());
  }
  for (const auto& mc : rec.step.malformed)
    entries.push_back(json{{"tool", mc.tool}, {"raw", mc.raw}}.dump());
  std::sort(entries.begin(), entries.end());
  return entries;
}

// A drone-state verification is a successful read of a watched drone's
// properties, or a successful wait_until_* observation that covers one.
bool verified_drone_state(const IterationRecord& rec, const std::set<std::string>& drones) {
  const auto& calls = rec.step.tool_calls;
  for (std::size_t i = 0; i < calls.size() && i < rec.results.size(); ++i) {
    if (!rec.results[i].ok()) continue;
    const auto& call = calls[i];
    if (call.tool == "read_web_thing_property") {
      if (call.arguments.is_object() && call.arguments.contains("thing") &&
          call.arguments.at("thing").is_string() &&
          drones.count(call.arguments.at("thing").get<std::string>()))
        return true;
    } else if (call.tool.rfind("wait_until_", 0) == 0) {
      if (call.arguments.is_object() && call.arguments.contains("things") &&
          call.arguments.at("things").is_array()) {
        for (const auto& t : call.arguments.at("things"))
          if (t.is_string() && drones.count(t.get<std::string>())) return true;
      }
    }
  }
  return false;
}

}  // namespace

std::vector<GuardrailId> evaluate_guardrails(
    const std::vector<IterationRecord>& history, const std::vector<std::string>& drone_ids,
    const std::function<json(const std::string&, const std::string&)>& read_property,
    const GuardrailConfig& cfg) {
  std::vector<GuardrailId> fired;
  if (history.empty()) return fired;
  const auto& current = history.back();
  const std::set<std::string> drones(drone_ids.begin(), drone_ids.end());
  const bool concluding = current.step.final_text.has_value();

  if (concluding) {
    bool verified = false;
    const int k = std::max(cfg.verify_lookback_k, 1);
    const std::size_t from = history.size() > static_cast<std::size_t>(k)
                                 ? history.size() - static_cast<std::size_t>(k)
                                 : 0;
    for (std::size_t i = from; i < history.size() && !verified; ++i)
      verified = verified_drone_state(history[i], drones);
    if (!verified) fired.push_back(GuardrailId::unverified_completion);
  }

  const int n = std::max(cfg.stall_window_n, 2);
  if (history.size() >= static_cast<std::size_t>(n)) {
    const std::size_t from = history.size() - static_cast<std::size_t>(n);
    bool stalled = !history[from].step.tool_calls.empty() ||
                   !history[from].step.malformed.empty();
    const auto reference = iteration_signature(history[from]);
    for (std::size_t i = from; i < history.size() && stalled; ++i) {
      if (i > from && iteration_signature(history[i]) != reference) stalled = false;
      // A fire inside the window resets the count: the reasoner gets N fresh
      // iterations to react to the injected fragment before the next fire.
      if (i + 1 < history.size() &&
          std::find(history[i].injected.begin(), history[i].injected.end(),
                    GuardrailId::stalled_execution) != history[i].injected.end())
        stalled = false;
    }
    if (stalled) fired.push_back(GuardrailId::stalled_execution);
  }

  if (concluding) {
    bool active = false;
    for (const auto& id : drone_ids) {
      const auto armed = read_property(id, "armed");
      const auto airborne = read_property(id, "airborne");
      if ((armed.is_boolean() && armed.get<bool>()) ||
          (airborne.is_boolean() && airborne.get<bool>())) {
        active = true;
        break;
      }
    }
    if (active) fired.push_back(GuardrailId::unsafe_termination);
  }

  return fired;
}

namespace {

void watch_plan(RunTrace& trace, const gateway::ToolCall& call, const gateway::ToolResult& r) {
  if (!r.ok()) return;
  if (call.tool == "plan_area_coverage") {
    trace.plan = r.payload;
    trace.plan_kind = "coverage";
  } else if (call.tool == "plan_drone_formation") {
    trace.plan = r.payload;
    trace.plan_kind = "formation";
  } else if (call.tool == "call_web_thing_action" && call.arguments.is_object()) {
    const auto action = call.arguments.value("action", std::string());
    if (action == "plan_area_coverage" || action == "plan_drone_formation") {
      trace.plan = r.payload.value("result", json());
      trace.plan_kind = action == "plan_area_coverage" ? "coverage" : "formation";
    }
  }
}

}  // namespace

RunTrace run_mission(const MissionBrief& brief, Reasoner& reasoner, gateway::Gateway& gw,
                     const PromptSet& prompts, RunLimits limits, GuardrailConfig guardrails) {
  if (!is_mission_kind(brief.kind))
    throw DomainError("UnknownMission", "no mission kind named " + brief.kind);

  RunTrace trace;
  trace.mission_id = brief.mission_id;
  trace.mission_kind = brief.kind;
  trace.sim_time_start = gw.sim_time();
  trace.termination = Termination::iteration_cap;

  AgentContext ctx;
  ctx.messages.push_back({Role::system, prompts.core.text, {}, std::nullopt});
  ctx.messages.push_back(
      {Role::user, prompts.render_user(brief.kind, brief.user_params).text, {}, std::nullopt});

  std::map<GuardrailId, int> fires;
  int probe_seq = 0;
  const auto probe = [&](const std::string& thing, const std::string& property) -> json {
    gateway::ToolCall call;
    call.call_id = "guard-" + std::to_string(++probe_seq);
    call.tool = "read_web_thing_property";
    call.arguments = json{{"thing", thing}, {"property", property}};
    const auto r = gw.call_tool(call, gateway::CallSource::helper);
    if (!r.ok())
      throw DomainError(r.error_code.value_or("InternalError"),
                        "guardrail probe failed: " + r.error_detail.value_or(""));
    return r.payload.at("value");
  };

  for (int iter = 1; iter <= limits.max_iterations; ++iter) {
    ctx.iteration = iter;
    const std::vector<Message> prompt_snapshot = ctx.messages;
    ReasonerStep step = reasoner.step(ctx, gw.list_tools());
    if (!step.valid()) {
      trace.termination = Termination::error;
      trace.note = "reasoner protocol violation: a step must either call tools or conclude";
      break;
    }
    record_usage(trace.tokens, step, prompt_snapshot, reasoner, iter);

    Message assistant;
    assistant.role = Role::assistant;
    assistant.content = step.final_text.value_or("");
    assistant.tool_calls = step.tool_calls;
    ctx.messages.push_back(std::move(assistant));

    IterationRecord rec;
    rec.iteration = iter;
    rec.step = step;
    for (const auto& call : step.tool_calls) {
      auto result = gw.call_tool(call, gateway::CallSource::agent);
      watch_plan(trace, call, result);
      ctx.messages.push_back({Role::tool, result.to_json().dump(), {}, result.call_id});
      rec.results.push_back(std::move(result));
    }
    for (const auto& mc : step.malformed) {
      auto result = gateway::ToolResult::failure(
          mc.call_id, "MalformedToolCall",
          "tool call arguments were not a valid JSON object: " + mc.raw);
      ctx.messages.push_back({Role::tool, result.to_json().dump(), {}, result.call_id});
      rec.results.push_back(std::move(result));
    }
    if (step.acts()) gw.advance_sim(limits.iteration_advance_s);
    rec.sim_time_after = gw.sim_time();
    trace.iterations.push_back(std::move(rec));

    const auto fired =
        evaluate_guardrails(trace.iterations, brief.drone_ids, probe, guardrails);
    trace.iterations.back().injected = fired;
    bool over_cap = false;
    for (const auto g : fired) {
      if (fires[g] >= guardrails.max_fires) {
        over_cap = true;
        break;
      }
      ++fires[g];
      ++ctx.injected_guardrails[g];
      ctx.messages.push_back({Role::system, prompts.guardrails.at(g).text, {}, std::nullopt});
    }
    if (over_cap) {
      trace.termination = Termination::infeasible;
      trace.note = "guardrail fired beyond its per-run limit";
      break;
    }
    if (step.final_text && fired.empty()) {
      trace.termination = Termination::completed;
      trace.final_text = step.final_text;
      break;
    }
    if (gw.sim_time() - trace.sim_time_start > limits.sim_timeout_s) {
      trace.termination = Termination::infeasible;
      trace.note = "simulated-time budget exhausted";
      break;
    }
  }
  if (trace.termination == Termination::iteration_cap && !trace.note)
    trace.note = "iteration cap reached";
  trace.sim_time_end = gw.sim_time();
  return trace;
}

gateway::ToolResult helper_send_drones_to_positions(gateway::Gateway& gw, const json& targets,
                                                    const std::string& call_id) {
  if (!gw.config().helper_tools)
    throw DomainError("HelperDisabled", "helper tools are disabled for this run");
  gateway::ToolCall call;
  call.call_id = call_id;
  call.tool = "send_drones_to_positions";
  call.arguments = json{{"commands", targets}};
  return gw.call_tool(call, gateway::CallSource::helper);
}

gateway::ToolResult helper_wait_until(gateway::Gateway& gw, const std::string& kind,
                                      const std::vector<std::string>& drone_ids,
                                      double timeout_s, const std::string& call_id) {
  if (!gw.config().helper_tools)
    throw DomainError("HelperDisabled", "helper tools are disabled for this run");
  if (kind != "armed" && kind != "arrived" && kind != "landed")
    throw DomainError("SchemaViolation", "wait kind must be armed, arrived, or landed");
  gateway::ToolCall call;
  call.call_id = call_id;
  call.tool = "wait_until_" + kind;
  call.arguments = json{{"things", drone_ids}, {"timeout_s", timeout_s}};
  return gw.call_tool(call, gateway::CallSource::helper);
}

}  // namespace swarmloop::agent
