#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "swarmloop/agent/agent.hpp"
#include "swarmloop/agent/prompts.hpp"
#include "swarmloop/agent/remote.hpp"
#include "swarmloop/agent/scripted.hpp"
#include "swarmloop/directory/directory.hpp"
#include "swarmloop/gateway/gateway.hpp"
#include "swarmloop/plan/planners.hpp"
#include "swarmloop/sim/world.hpp"
#include "swarmloop/wot/things.hpp"

using swarmloop::DomainError;
using swarmloop::json;
using swarmloop::agent::AgentContext;
using swarmloop::agent::estimate_tokens;
using swarmloop::agent::evaluate_guardrails;
using swarmloop::agent::GuardrailConfig;
using swarmloop::agent::GuardrailId;
using swarmloop::agent::IterationRecord;
using swarmloop::agent::Message;
using swarmloop::agent::MissionBrief;
using swarmloop::agent::PromptSet;
using swarmloop::agent::Reasoner;
using swarmloop::agent::ReasonerStep;
using swarmloop::agent::Role;
using swarmloop::agent::RunLimits;
using swarmloop::agent::run_mission;
using swarmloop::agent::RunTrace;
using swarmloop::agent::Termination;
using swarmloop::agent::TokenLedger;
using swarmloop::gateway::Gateway;
using swarmloop::gateway::GatewayConfig;
using swarmloop::gateway::ToolCall;
using swarmloop::gateway::ToolDefinition;
using swarmloop::gateway::ToolResult;
namespace sim = swarmloop::sim;
namespace wot = swarmloop::wot;

namespace {

sim::WorldConfig unit_tick_config() {
  sim::WorldConfig cfg;
  cfg.tick_dt = 1.0;
  return cfg;
}

struct Rig {
  sim::World world;
  wot::Servient servient;
  swarmloop::directory::Directory dir;
  std::unique_ptr<Gateway> gw;

  explicit Rig(GatewayConfig gcfg = {}, int n_drones = 3,
               std::vector<sim::DeviceSpec> devices = {})
      : world(unit_tick_config(), n_drones, std::move(devices)) {
    wot::register_world_things(servient, world);
    if (gcfg.planning_tools) wot::register_planner_things(servient);
    for (const auto& id : servient.thing_ids()) dir.register_td(servient.td(id).to_json());
    gw = std::make_unique<Gateway>(gcfg, world, servient, dir);
  }
};

ToolCall make_call(const std::string& id, const std::string& tool, json args) {
  ToolCall c;
  c.call_id = id;
  c.tool = tool;
  c.arguments = std::move(args);
  return c;
}

ReasonerStep conclude_step(const std::string& text) {
  ReasonerStep s;
  s.final_text = text;
  return s;
}

ReasonerStep act_step(std::vector<ToolCall> calls) {
  ReasonerStep s;
  s.tool_calls = std::move(calls);
  return s;
}

// Drives run_mission with an arbitrary per-iteration policy.
class LambdaReasoner final : public Reasoner {
public:
  using Fn = std::function<ReasonerStep(const AgentContext&, const std::vector<ToolDefinition>&)>;
  explicit LambdaReasoner(Fn fn) : fn_(std::move(fn)) {}
  ReasonerStep step(const AgentContext& ctx,
                    const std::vector<ToolDefinition>& tools) override {
    return fn_(ctx, tools);
  }

private:
  Fn fn_;
};

// Counter-only reasoner for ledger unit tests.
class CountingReasoner final : public Reasoner {
public:
  ReasonerStep step(const AgentContext&, const std::vector<ToolDefinition>&) override {
    return conclude_step("");
  }
  std::optional<std::int64_t> count_tokens(const std::string& text) const override {
    return estimate_tokens(text);
  }
};

// No counter at all: components must stay unattributed.
class BlindReasoner final : public Reasoner {
public:
  ReasonerStep step(const AgentContext&, const std::vector<ToolDefinition>&) override {
    return conclude_step("");
  }
};

IterationRecord record_of(int iteration, ReasonerStep step, std::vector<ToolResult> results) {
  IterationRecord rec;
  rec.iteration = iteration;
  rec.step = std::move(step);
  rec.results = std::move(results);
  return rec;
}

IterationRecord read_record(int iteration, const std::string& thing, const json& value,
                            bool ok = true) {
  auto call = make_call("c" + std::to_string(iteration), "read_web_thing_property",
                        json{{"thing", thing}, {"property", "position"}});
  ToolResult r = ok ? ToolResult::success(call.call_id, json{{"value", value}})
                    : ToolResult::failure(call.call_id, "UnknownThing", "no such thing");
  return record_of(iteration, act_step({call}), {r});
}

const auto kNoProbe = [](const std::string&, const std::string&) { return json(false); };

MissionBrief brief_for(const std::string& kind, std::vector<std::string> drones) {
  MissionBrief b;
  b.mission_id = "m-" + kind;
  b.kind = kind;
  b.drone_ids = std::move(drones);
  return b;
}

// Minimal chat-completions stand-in: replays a scripted list of responses,
// repeating the last one, and records every request body.
struct StubBackend {
  httplib::Server svr;
  std::thread thread;
  int port = 0;
  std::mutex mu;
  std::vector<json> requests;
  std::vector<std::pair<int, std::string>> responses;

  explicit StubBackend(std::vector<std::pair<int, std::string>> script)
      : responses(std::move(script)) {
    svr.Post("/v1/chat/completions",
             [this](const httplib::Request& req, httplib::Response& res) {
               std::lock_guard<std::mutex> lock(mu);
               requests.push_back(json::parse(req.body));
               const auto idx = std::min(requests.size() - 1, responses.size() - 1);
               res.status = responses[idx].first;
               res.set_content(responses[idx].second, "application/json");
             });
    port = svr.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }
  ~StubBackend() {
    svr.stop();
    thread.join();
  }

  std::size_t hits() {
    std::lock_guard<std::mutex> lock(mu);
    return requests.size();
  }
  json request(std::size_t i) {
    std::lock_guard<std::mutex> lock(mu);
    return requests.at(i);
  }
  swarmloop::agent::RemoteConfig config() const {
    swarmloop::agent::RemoteConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    cfg.model = "stub-model";
    cfg.backoff_s = 0.0;
    return cfg;
  }
};

std::string chat_text(const std::string& text, bool usage = true) {
  json msg{{"role", "assistant"}, {"content", text}};
  json body{{"choices", json::array({json{{"message", msg}}})}};
  if (usage) body["usage"] = json{{"prompt_tokens", 120}, {"completion_tokens", 8}};
  return body.dump();
}

std::string chat_tool_call(const std::string& id, const std::string& name,
                           const std::string& arguments, bool usage = true) {
  json calls = json::array({json{{"id", id},
                                 {"type", "function"},
                                 {"function", json{{"name", name}, {"arguments", arguments}}}}});
  json msg{{"role", "assistant"}, {"content", "on it"}, {"tool_calls", calls}};
  json body{{"choices", json::array({json{{"message", msg}}})}};
  if (usage) body["usage"] = json{{"prompt_tokens", 90}, {"completion_tokens", 15}};
  return body.dump();
}

}  // namespace

TEST_CASE("prompt inventory: builtin set, file parity, rendering") {
  const auto set = PromptSet::builtin();
  CHECK(set.core.kind == swarmloop::agent::PromptKind::core);
  CHECK(!set.core.text.empty());
  CHECK(set.user_templates.size() == 4);
  for (const auto* kind :
       {"coverage_with_tool", "coverage_no_tool", "formation", "irrigation"}) {
    CHECK(swarmloop::agent::is_mission_kind(kind));
    CHECK(set.user_templates.count(kind) == 1);
  }
  CHECK(!swarmloop::agent::is_mission_kind("patrol"));
  CHECK(set.guardrails.size() == 3);
  for (const auto& [id, art] : set.guardrails) {
    CHECK(art.kind == swarmloop::agent::PromptKind::guardrail);
    CHECK(art.guardrail_id == id);
    CHECK(!art.text.empty());
  }

  // The shipped files are the same inventory, byte for byte.
  const auto loaded = PromptSet::load(std::string(SWARMLOOP_SOURCE_DIR) + "/prompts");
  CHECK(loaded.core.text == set.core.text);
  CHECK(loaded.user_templates == set.user_templates);
  REQUIRE(loaded.guardrails.size() == set.guardrails.size());
  for (const auto& [id, art] : set.guardrails)
    CHECK(loaded.guardrails.at(id).text == art.text);

  CHECK_THROWS_AS(PromptSet::load("/nonexistent-prompt-dir"), DomainError);

  const auto rendered = set.render_user(
      "coverage_with_tool", json{{"width", 400.0},
                                 {"height", 300.0},
                                 {"origin_x", 0.0},
                                 {"origin_y", 0.0},
                                 {"n_drones", 10},
                                 {"alt_min", 10.0},
                                 {"alt_max", 120.0},
                                 {"fov_deg", 90.0}});
  CHECK(rendered.kind == swarmloop::agent::PromptKind::user);
  CHECK(rendered.text.find("{width}") == std::string::npos);
  CHECK(rendered.text.find("400.0") != std::string::npos);
  CHECK(rendered.text.find("10") != std::string::npos);
  CHECK_THROWS_AS(set.render_user("patrol", json::object()), DomainError);
}

TEST_CASE("template placeholders: strings raw, numbers as JSON, unknown verbatim") {
  using swarmloop::agent::render_template;
  CHECK(render_template("fly {shape} at {alt} m", json{{"shape", "star"}, {"alt", 12.5}}) ==
        "fly star at 12.5 m");
  CHECK(render_template("{n} drones", json{{"n", 10}}) == "10 drones");
  CHECK(render_template("keep {unknown} here", json{{"n", 1}}) == "keep {unknown} here");
  CHECK(render_template("{a}{a}", json{{"a", "x"}}) == "xx");
  CHECK(render_template("no params", json::object()) == "no params");

  CHECK(swarmloop::agent::to_string(GuardrailId::stalled_execution) == "stalled_execution");
  CHECK(swarmloop::agent::guardrail_from_string("unsafe_termination") ==
        GuardrailId::unsafe_termination);
  CHECK_THROWS_AS(swarmloop::agent::guardrail_from_string("nope"), DomainError);
}

TEST_CASE("token estimator: ceil of quarter character count") {
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("a") == 1);
  CHECK(estimate_tokens("abcd") == 1);
  CHECK(estimate_tokens("abcde") == 2);
  CHECK(estimate_tokens(std::string(4000, 'x')) == 1000);
}

TEST_CASE("usage records: attribution only when sums reproduce the totals") {
  CountingReasoner counter;
  std::vector<Message> prompt{
      {Role::system, "abcdefgh", {}, std::nullopt},  // 2 tokens
      {Role::user, "abcd", {}, std::nullopt},        // 1 token
  };

  ReasonerStep step = conclude_step("abcdefgh");  // 2 completion tokens
  step.usage.provided = true;
  step.usage.prompt_tokens = 3;
  step.usage.completion_tokens = 2;

  TokenLedger ledger;
  swarmloop::agent::record_usage(ledger, step, prompt, counter, 1);
  REQUIRE(ledger.iterations.size() == 1);
  const auto& it1 = ledger.iterations[0];
  CHECK(it1.iteration == 1);
  CHECK(it1.prompt_tokens == 3);
  CHECK(it1.completion_tokens == 2);
  CHECK_FALSE(it1.estimated);
  REQUIRE(it1.prompt_components.has_value());
  CHECK(it1.prompt_components->system == 2);
  CHECK(it1.prompt_components->user == 1);
  CHECK(it1.prompt_components->history == 0);
  CHECK(it1.prompt_components->toolout == 0);
  CHECK(it1.prompt_components->sum() == it1.prompt_tokens);
  REQUIRE(it1.completion_components.has_value());
  CHECK(it1.completion_components->text == 2);
  CHECK(it1.completion_components->toolcall == 0);

  // Second iteration: the tool output of iteration 1 now sits in the prompt.
  auto call = make_call("t1", "read_web_thing_property",
                        json{{"thing", "uav-1"}, {"property", "armed"}});
  Message assistant{Role::assistant, "", {call}, std::nullopt};
  Message toolmsg{Role::tool, std::string(40, 'r'), {}, std::string("t1")};
  std::vector<Message> prompt2 = prompt;
  prompt2.push_back(assistant);
  prompt2.push_back(toolmsg);

  ReasonerStep step2 = act_step({call});
  const auto call_tokens = estimate_tokens(call.to_json().dump());
  step2.usage.provided = true;
  step2.usage.prompt_tokens = 3 + estimate_tokens(swarmloop::agent::prompt_token_text(assistant)) + 10;
  step2.usage.completion_tokens = call_tokens;

  swarmloop::agent::record_usage(ledger, step2, prompt2, counter, 2);
  REQUIRE(ledger.iterations.size() == 2);
  const auto& it2 = ledger.iterations[1];
  REQUIRE(it2.prompt_components.has_value());
  CHECK(it2.prompt_components->toolout == 10);  // 40 chars / 4
  CHECK(it2.prompt_components->history ==
        estimate_tokens(swarmloop::agent::prompt_token_text(assistant)));
  CHECK(it2.prompt_components->sum() == it2.prompt_tokens);
  REQUIRE(it2.completion_components.has_value());
  CHECK(it2.completion_components->text == 0);
  CHECK(it2.completion_components->toolcall == call_tokens);

  // Aggregates that the counter cannot reproduce stay unattributed.
  ReasonerStep off = conclude_step("abcd");
  off.usage.provided = true;
  off.usage.prompt_tokens = 999;
  off.usage.completion_tokens = 1;
  swarmloop::agent::record_usage(ledger, off, prompt, counter, 3);
  CHECK(ledger.iterations[2].prompt_tokens == 999);
  CHECK_FALSE(ledger.iterations[2].prompt_components.has_value());
  CHECK_FALSE(ledger.iterations[2].estimated);

  // No usage metadata: totals fall back to the estimator and say so.
  ReasonerStep bare = conclude_step("abcdefgh");
  bare.usage.provided = false;
  swarmloop::agent::record_usage(ledger, bare, prompt, counter, 4);
  CHECK(ledger.iterations[3].estimated);
  CHECK(ledger.iterations[3].prompt_tokens == 3);
  CHECK(ledger.iterations[3].completion_tokens == 2);
  CHECK_FALSE(ledger.iterations[3].prompt_components.has_value());

  // No counter either: same fallback, still unattributed.
  BlindReasoner blind;
  TokenLedger blind_ledger;
  ReasonerStep provided = conclude_step("abcd");
  provided.usage.provided = true;
  provided.usage.prompt_tokens = 7;
  provided.usage.completion_tokens = 4;
  swarmloop::agent::record_usage(blind_ledger, provided, prompt, blind, 1);
  CHECK(blind_ledger.iterations[0].prompt_tokens == 7);
  CHECK_FALSE(blind_ledger.iterations[0].prompt_components.has_value());

  // The run total is exactly the sum of per-iteration prompt + completion.
  std::int64_t expect = 0;
  for (const auto& it : ledger.iterations) expect += it.prompt_tokens + it.completion_tokens;
  CHECK(ledger.total() == expect);
  CHECK(ledger.total() == ledger.total_prompt() + ledger.total_completion());

  const auto round = TokenLedger::from_json(ledger.to_json());
  CHECK(round.to_json() == ledger.to_json());
}

TEST_CASE("completion guardrail: fires without a recent drone-state read") {
  const std::vector<std::string> drones{"uav-1", "uav-2"};
  GuardrailConfig cfg;

  std::vector<IterationRecord> history;
  history.push_back(record_of(1, conclude_step("done"), {}));
  auto fired = evaluate_guardrails(history, drones, kNoProbe, cfg);
  REQUIRE(fired.size() == 1);
  CHECK(fired[0] == GuardrailId::unverified_completion);

  // A successful read of a watched drone inside the lookback silences it.
  history.clear();
  history.push_back(read_record(1, "uav-2", json{{"x", 0}}));
  history.push_back(record_of(2, conclude_step("done"), {}));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, cfg).empty());

  // Reads of non-drone things do not count.
  history.clear();
  history.push_back(read_record(1, "hum-1", json{{"x", 0}}));
  history.push_back(record_of(2, conclude_step("done"), {}));
  fired = evaluate_guardrails(history, drones, kNoProbe, cfg);
  REQUIRE(fired.size() == 1);
  CHECK(fired[0] == GuardrailId::unverified_completion);

  // Failed reads do not count either.
  history.clear();
  history.push_back(read_record(1, "uav-1", json(), false));
  history.push_back(record_of(2, conclude_step("done"), {}));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, cfg).size() == 1);

  // A read exactly at the edge of the window still counts; one step further
  // out does not.
  cfg.verify_lookback_k = 2;
  history.clear();
  history.push_back(read_record(1, "uav-1", json{{"x", 0}}));
  history.push_back(record_of(2, conclude_step("done"), {}));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, cfg).empty());
  history.clear();
  history.push_back(read_record(1, "uav-1", json{{"x", 0}}));
  history.push_back(record_of(2, act_step({make_call("c", "list_web_things", json::object())}),
                              {ToolResult::success("c", json{{"things", json::array()}})}));
  history.push_back(record_of(3, conclude_step("done"), {}));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, cfg).size() == 1);

  // wait_until observations cover the drones they watched.
  history.clear();
  auto wait = make_call("w", "wait_until_landed",
                        json{{"things", json::array({"uav-1"})}, {"timeout_s", 5.0}});
  history.push_back(record_of(
      1, act_step({wait}),
      {ToolResult::success("w", json{{"satisfied", true}, {"waited_s", 0.0}})}));
  history.push_back(record_of(2, conclude_step("done"), {}));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, GuardrailConfig{}).empty());

  // Acting steps never trigger it.
  history.clear();
  history.push_back(record_of(1, act_step({make_call("c", "list_web_things", json::object())}),
                              {ToolResult::success("c", json::object())}));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, GuardrailConfig{}).empty());
}

TEST_CASE("stall guardrail: identical windows fire, fires reset the window") {
  const std::vector<std::string> drones{"uav-1"};
  GuardrailConfig cfg;  // window 3

  std::vector<IterationRecord> history;
  const json pos{{"x", 1.0}, {"y", 2.0}, {"z", 0.0}};
  history.push_back(read_record(1, "uav-1", pos));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, cfg).empty());
  history.push_back(read_record(2, "uav-1", pos));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, cfg).empty());
  history.push_back(read_record(3, "uav-1", pos));
  auto fired = evaluate_guardrails(history, drones, kNoProbe, cfg);
  REQUIRE(fired.size() == 1);
  CHECK(fired[0] == GuardrailId::stalled_execution);

  // Mark the fire; the next two identical iterations sit in a reset window.
  history.back().injected = {GuardrailId::stalled_execution};
  history.push_back(read_record(4, "uav-1", pos));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, cfg).empty());
  history.push_back(read_record(5, "uav-1", pos));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, cfg).empty());
  history.push_back(read_record(6, "uav-1", pos));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, cfg).size() == 1);

  // Changing results break the stall: same call, moving value.
  history.clear();
  history.push_back(read_record(1, "uav-1", json{{"x", 1.0}}));
  history.push_back(read_record(2, "uav-1", json{{"x", 2.0}}));
  history.push_back(read_record(3, "uav-1", json{{"x", 3.0}}));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, cfg).empty());

  // Fresh call ids alone do not break it (ids are excluded from the
  // signature); read_record already assigns a new id per iteration.

  // The window only counts acting steps.
  history.clear();
  history.push_back(record_of(1, conclude_step("a"), {}));
  history.back().step.final_text = "a";
  history.push_back(record_of(2, conclude_step("a"), {}));
  history.push_back(record_of(3, conclude_step("a"), {}));
  fired = evaluate_guardrails(history, drones, kNoProbe, cfg);
  for (const auto g : fired) CHECK(g != GuardrailId::stalled_execution);

  // Window width is configurable.
  cfg.stall_window_n = 5;
  history.clear();
  for (int i = 1; i <= 4; ++i) history.push_back(read_record(i, "uav-1", pos));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, cfg).empty());
  history.push_back(read_record(5, "uav-1", pos));
  CHECK(evaluate_guardrails(history, drones, kNoProbe, cfg).size() == 1);
}

TEST_CASE("termination guardrail: concluding over an active drone") {
  const std::vector<std::string> drones{"uav-1", "uav-2"};
  std::map<std::string, std::map<std::string, bool>> state{
      {"uav-1", {{"armed", false}, {"airborne", false}}},
      {"uav-2", {{"armed", false}, {"airborne", false}}},
  };
  int probes = 0;
  const auto probe = [&](const std::string& thing, const std::string& prop) {
    ++probes;
    return json(state.at(thing).at(prop));
  };

  std::vector<IterationRecord> history;
  history.push_back(read_record(1, "uav-1", json{{"x", 0}}));
  history.push_back(record_of(2, conclude_step("done"), {}));

  CHECK(evaluate_guardrails(history, drones, probe, GuardrailConfig{}).empty());
  CHECK(probes == 4);  // armed + airborne for both drones

  state["uav-2"]["airborne"] = true;
  auto fired = evaluate_guardrails(history, drones, probe, GuardrailConfig{});
  REQUIRE(fired.size() == 1);
  CHECK(fired[0] == GuardrailId::unsafe_termination);

  state["uav-2"]["airborne"] = false;
  state["uav-1"]["armed"] = true;
  fired = evaluate_guardrails(history, drones, probe, GuardrailConfig{});
  REQUIRE(fired.size() == 1);
  CHECK(fired[0] == GuardrailId::unsafe_termination);

  // Acting steps are never checked.
  history.pop_back();
  probes = 0;
  CHECK(evaluate_guardrails(history, drones, probe, GuardrailConfig{}).empty());
  CHECK(probes == 0);

  // Both completion guardrails can fire together, in declaration order.
  history.clear();
  history.push_back(record_of(1, conclude_step("done"), {}));
  fired = evaluate_guardrails(history, drones, probe, GuardrailConfig{});
  REQUIRE(fired.size() == 2);
  CHECK(fired[0] == GuardrailId::unverified_completion);
  CHECK(fired[1] == GuardrailId::unsafe_termination);
}

TEST_CASE("mission loop: verified conclusion completes and accounts tokens") {
  Rig rig;
  const auto prompts = PromptSet::builtin();
  LambdaReasoner reasoner([](const AgentContext& ctx, const std::vector<ToolDefinition>&) {
    if (ctx.iteration == 1)
      return act_step({make_call("r1", "read_web_thing_property",
                                 json{{"thing", "uav-1"}, {"property", "armed"}})});
    return conclude_step("Fleet inspected; nothing was armed, nothing flew.");
  });

  auto brief = brief_for("coverage_with_tool", {"uav-1", "uav-2", "uav-3"});
  const auto trace = run_mission(brief, reasoner, *rig.gw, prompts);

  CHECK(trace.termination == Termination::completed);
  REQUIRE(trace.final_text.has_value());
  CHECK(trace.final_text->find("inspected") != std::string::npos);
  REQUIRE(trace.iterations.size() == 2);
  CHECK(trace.iterations[0].results.size() == 1);
  CHECK(trace.iterations[0].results[0].ok());
  CHECK(trace.iterations[0].injected.empty());
  CHECK(trace.iterations[1].injected.empty());
  CHECK(trace.mission_kind == "coverage_with_tool");
  CHECK(trace.plan.is_null());
  CHECK(trace.plan_kind.empty());

  // One acting iteration advanced the sim; the concluding one did not.
  CHECK(trace.sim_time_start == 0.0);
  CHECK(trace.iterations[0].sim_time_after == 5.0);
  CHECK(trace.iterations[1].sim_time_after == 5.0);
  CHECK(trace.sim_time_end == 5.0);

  // Ledger: one entry per iteration; totals hold; estimator fallback (the
  // lambda provides no usage metadata).
  REQUIRE(trace.tokens.iterations.size() == 2);
  CHECK(trace.tokens.iterations[0].estimated);
  CHECK(trace.tokens.total() ==
        trace.tokens.total_prompt() + trace.tokens.total_completion());

  // The context began with the core prompt and the rendered mission prompt:
  // both priced into iteration 1's prompt side.
  CHECK(trace.tokens.iterations[0].prompt_tokens >=
        estimate_tokens(prompts.core.text));

  const auto round = RunTrace::from_json(trace.to_json());
  CHECK(round.to_json() == trace.to_json());
}

TEST_CASE("mission loop: unknown kind and reasoner failure propagate") {
  Rig rig;
  LambdaReasoner reasoner([](const AgentContext&, const std::vector<ToolDefinition>&) {
    return conclude_step("x");
  });
  auto bad = brief_for("patrol", {"uav-1"});
  CHECK_THROWS_AS(run_mission(bad, reasoner, *rig.gw, PromptSet::builtin()), DomainError);

  LambdaReasoner broken([](const AgentContext&, const std::vector<ToolDefinition>&) -> ReasonerStep {
    throw DomainError("ReasonerFailure", "backend unreachable");
  });
  auto brief = brief_for("formation", {"uav-1"});
  CHECK_THROWS_AS(run_mission(brief, broken, *rig.gw, PromptSet::builtin()), DomainError);
}

TEST_CASE("mission loop: a step that both acts and concludes is a protocol error") {
  Rig rig;
  LambdaReasoner reasoner([](const AgentContext&, const std::vector<ToolDefinition>&) {
    ReasonerStep s;
    s.final_text = "done";
    s.tool_calls.push_back(make_call("c", "list_web_things", json::object()));
    return s;
  });
  auto brief = brief_for("irrigation", {"uav-1"});
  const auto trace = run_mission(brief, reasoner, *rig.gw, PromptSet::builtin());
  CHECK(trace.termination == Termination::error);
  REQUIRE(trace.note.has_value());
  CHECK(trace.note->find("protocol") != std::string::npos);
  CHECK(trace.iterations.empty());
  CHECK_FALSE(trace.final_text.has_value());

  // A step with neither is the same violation.
  LambdaReasoner empty([](const AgentContext&, const std::vector<ToolDefinition>&) {
    return ReasonerStep{};
  });
  const auto t2 = run_mission(brief, empty, *rig.gw, PromptSet::builtin());
  CHECK(t2.termination == Termination::error);
}

TEST_CASE("mission loop: malformed calls come back as error results") {
  Rig rig;
  bool saw_feedback = false;
  LambdaReasoner reasoner([&](const AgentContext& ctx, const std::vector<ToolDefinition>&) {
    if (ctx.iteration == 1) {
      ReasonerStep s;
      s.malformed.push_back({"m1", "call_web_thing_action", "{not json"});
      return s;
    }
    if (ctx.iteration == 2) {
      const auto& last = ctx.messages.back();
      REQUIRE(last.role == Role::tool);
      REQUIRE(last.call_id == std::string("m1"));
      const auto fed = json::parse(last.content);
      CHECK(fed.at("status") == "error");
      CHECK(fed.at("error_code") == "MalformedToolCall");
      saw_feedback = true;
      return act_step({make_call("r1", "read_web_thing_property",
                                 json{{"thing", "uav-1"}, {"property", "armed"}})});
    }
    return conclude_step("recovered");
  });

  auto brief = brief_for("coverage_no_tool", {"uav-1"});
  const auto trace = run_mission(brief, reasoner, *rig.gw, PromptSet::builtin());
  CHECK(saw_feedback);
  CHECK(trace.termination == Termination::completed);
  REQUIRE(trace.iterations.size() == 3);
  REQUIRE(trace.iterations[0].results.size() == 1);
  CHECK(trace.iterations[0].results[0].error_code == std::string("MalformedToolCall"));
  CHECK(trace.iterations[0].step.malformed.size() == 1);
}

TEST_CASE("mission loop: unverified conclusions draw the guardrail then end the run") {
  Rig rig;
  LambdaReasoner stubborn([](const AgentContext&, const std::vector<ToolDefinition>&) {
    return conclude_step("all done, trust me");
  });
  auto brief = brief_for("coverage_with_tool", {"uav-1"});
  const auto trace = run_mission(brief, stubborn, *rig.gw, PromptSet::builtin());

  // Three tolerated fires, the fourth trigger ends the run.
  CHECK(trace.termination == Termination::infeasible);
  REQUIRE(trace.note.has_value());
  CHECK(trace.note->find("guardrail") != std::string::npos);
  REQUIRE(trace.iterations.size() == 4);
  for (const auto& rec : trace.iterations) {
    REQUIRE(rec.injected.size() == 1);
    CHECK(rec.injected[0] == GuardrailId::unverified_completion);
  }
  CHECK_FALSE(trace.final_text.has_value());
}

TEST_CASE("mission loop: guardrail fragments land in the context as system messages") {
  Rig rig;
  const auto prompts = PromptSet::builtin();
  std::vector<std::string> tails;
  LambdaReasoner reasoner([&](const AgentContext& ctx, const std::vector<ToolDefinition>&) {
    tails.push_back(ctx.messages.back().role == Role::system ? ctx.messages.back().content
                                                             : std::string());
    if (ctx.iteration <= 2) return conclude_step("done early");
    return act_step({make_call("r", "read_web_thing_property",
                               json{{"thing", "uav-1"}, {"property", "armed"}})});
  });
  auto brief = brief_for("formation", {"uav-1"});
  RunLimits limits;
  limits.max_iterations = 3;
  const auto trace = run_mission(brief, reasoner, *rig.gw, prompts, limits);
  (void)trace;

  REQUIRE(tails.size() == 3);
  // Iteration 1 sees the mission prompt last (no injection yet); iterations
  // after an unverified conclusion see that guardrail's fragment.
  CHECK(tails[0].empty());
  CHECK(tails[1] == prompts.guardrails.at(GuardrailId::unverified_completion).text);
  CHECK(tails[2] == prompts.guardrails.at(GuardrailId::unverified_completion).text);
}

TEST_CASE("mission loop: concluding over an armed drone trips the safety guardrail") {
  Rig rig;
  LambdaReasoner reasoner([](const AgentContext& ctx, const std::vector<ToolDefinition>&) {
    if (ctx.iteration == 1)
      return act_step({
          make_call("a1", "call_web_thing_action",
                    json{{"thing", "uav-1"}, {"action", "arm"}, {"input", json::object()}}),
          make_call("a2", "call_web_thing_action",
                    json{{"thing", "uav-1"},
                         {"action", "takeoff"},
                         {"input", json{{"alt", 5.0}}}}),
          make_call("a3", "read_web_thing_property",
                    json{{"thing", "uav-1"}, {"property", "armed"}}),
      });
    return conclude_step("mission accomplished");
  });

  auto brief = brief_for("coverage_with_tool", {"uav-1", "uav-2"});
  const auto trace = run_mission(brief, reasoner, *rig.gw, PromptSet::builtin());

  CHECK(trace.termination == Termination::infeasible);
  REQUIRE(trace.iterations.size() == 5);
  CHECK(trace.iterations[0].injected.empty());
  for (std::size_t i = 1; i < trace.iterations.size(); ++i) {
    REQUIRE(trace.iterations[i].injected.size() == 1);
    CHECK(trace.iterations[i].injected[0] == GuardrailId::unsafe_termination);
  }
  // The drone is still airborne; the run refused to sign off on it.
  CHECK(rig.world.drone("uav-1").armed);
}

TEST_CASE("mission loop: a spinning reasoner is stopped by the stall guardrail") {
  Rig rig;
  LambdaReasoner spinner([](const AgentContext&, const std::vector<ToolDefinition>&) {
    return act_step({make_call("r", "read_web_thing_property",
                               json{{"thing", "uav-1"}, {"property", "position"}})});
  });
  auto brief = brief_for("coverage_no_tool", {"uav-1"});
  const auto trace = run_mission(brief, spinner, *rig.gw, PromptSet::builtin());

  CHECK(trace.termination == Termination::infeasible);
  // Fires at iterations 3, 6, 9; the would-be fourth fire at 12 ends the run.
  REQUIRE(trace.iterations.size() == 12);
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const bool fire_point = (i + 1) % 3 == 0;
    CHECK(trace.iterations[i].injected.size() == (fire_point ? 1u : 0u));
    if (fire_point) CHECK(trace.iterations[i].injected[0] == GuardrailId::stalled_execution);
  }
}

TEST_CASE("mission loop: iteration cap and simulated-time budget") {
  Rig rig;
  int flip = 0;
  LambdaReasoner busy([&](const AgentContext&, const std::vector<ToolDefinition>&) {
    // Alternate two different reads so the stall window never matches.
    const char* prop = (flip++ % 2 == 0) ? "position" : "battery";
    return act_step({make_call("r", "read_web_thing_property",
                               json{{"thing", "uav-1"}, {"property", prop}})});
  });

  RunLimits limits;
  limits.max_iterations = 4;
  auto brief = brief_for("coverage_with_tool", {"uav-1"});
  const auto capped = run_mission(brief, busy, *rig.gw, PromptSet::builtin(), limits);
  CHECK(capped.termination == Termination::iteration_cap);
  CHECK(capped.iterations.size() == 4);
  REQUIRE(capped.note.has_value());
  CHECK(capped.note->find("iteration cap") != std::string::npos);

  Rig rig2;
  flip = 0;
  RunLimits tight;
  tight.sim_timeout_s = 12.0;  // three 5 s advances cross it
  const auto timed = run_mission(brief, busy, *rig2.gw, PromptSet::builtin(), tight);
  CHECK(timed.termination == Termination::infeasible);
  REQUIRE(timed.note.has_value());
  CHECK(timed.note->find("budget") != std::string::npos);
  CHECK(timed.iterations.size() == 3);
  CHECK(timed.sim_time_end == 15.0);
}

TEST_CASE("helper shortcuts: gated by config, delegate to the gateway") {
  Rig plain;
  CHECK_THROWS_AS(swarmloop::agent::helper_send_drones_to_positions(
                      *plain.gw, json::array(), "h1"),
                  DomainError);
  CHECK_THROWS_AS(swarmloop::agent::helper_wait_until(*plain.gw, "landed", {"uav-1"}, 1.0, "h2"),
                  DomainError);

  GatewayConfig gcfg;
  gcfg.helper_tools = true;
  Rig rig(gcfg);

  const auto grounded =
      swarmloop::agent::helper_wait_until(*rig.gw, "landed", {"uav-1", "uav-2"}, 2.0, "h2");
  REQUIRE(grounded.ok());
  CHECK(grounded.payload.at("satisfied") == true);  // nothing has flown yet
  CHECK(grounded.payload.at("waited_s") == 0.0);

  for (const auto* id : {"uav-1", "uav-2"}) {
    rig.world.cmd_arm(id);
    rig.world.cmd_takeoff(id, 5.0);
  }
  rig.world.advance(4.0);  // both at 5 m

  json targets = json::array({json{{"thing", "uav-1"}, {"x", 10.0}, {"y", 5.0}, {"alt", 8.0}},
                              json{{"thing", "uav-2"}, {"x", 20.0}, {"y", 5.0}, {"alt", 8.0}}});
  const auto sent = swarmloop::agent::helper_send_drones_to_positions(*rig.gw, targets, "h1");
  REQUIRE(sent.ok());
  REQUIRE(sent.payload.at("results").size() == 2);
  for (const auto& r : sent.payload.at("results")) CHECK(r.at("status") == "ok");
  REQUIRE(rig.world.drone("uav-1").target.has_value());
  CHECK(rig.world.drone("uav-1").target->x == 10.0);
  CHECK(rig.world.drone("uav-1").target->z == 8.0);
  REQUIRE(rig.world.drone("uav-2").target.has_value());

  const auto arrived =
      swarmloop::agent::helper_wait_until(*rig.gw, "arrived", {"uav-1", "uav-2"}, 60.0, "h4");
  REQUIRE(arrived.ok());
  CHECK(arrived.payload.at("satisfied") == true);
  CHECK(arrived.payload.at("waited_s").get<double>() > 0.0);

  CHECK_THROWS_AS(swarmloop::agent::helper_wait_until(*rig.gw, "afloat", {"uav-1"}, 1.0, "h3"),
                  DomainError);
}

namespace {

// Shared assertions for a finished scripted flight.
void check_flight_clean(const Rig& rig, const RunTrace& trace,
                        const std::vector<std::string>& flew) {
  CHECK(trace.termination == Termination::completed);
  REQUIRE(trace.final_text.has_value());
  CHECK(rig.world.collisions().empty());
  for (const auto& id : flew) {
    const auto d = rig.world.drone(id);
    CHECK_FALSE(d.armed);
    CHECK_FALSE(d.airborne);
    CHECK(d.position.z == doctest::Approx(0.0));
    CHECK(d.ever_airborne);
  }
  // Every ledger entry from the scripted reasoner is fully attributed.
  REQUIRE(trace.tokens.iterations.size() == trace.iterations.size());
  for (const auto& it : trace.tokens.iterations) {
    CHECK_FALSE(it.estimated);
    REQUIRE(it.prompt_components.has_value());
    REQUIRE(it.completion_components.has_value());
    CHECK(it.prompt_components->sum() == it.prompt_tokens);
    CHECK(it.completion_components->sum() == it.completion_tokens);
  }
  CHECK(trace.tokens.total() ==
        trace.tokens.total_prompt() + trace.tokens.total_completion());
  // Tool outputs are priced into the following iteration's prompt.
  CHECK(trace.tokens.iterations[0].prompt_components->toolout == 0);
  CHECK(trace.tokens.iterations[1].prompt_components->toolout > 0);
  // No guardrail ever fired on the scripted flight.
  for (const auto& rec : trace.iterations) CHECK(rec.injected.empty());
}

}  // namespace

TEST_CASE("scripted flight: grid coverage through the planner tool, helpers on") {
  GatewayConfig gcfg;
  gcfg.planning_tools = true;
  gcfg.helper_tools = true;
  Rig rig(gcfg, 10);

  std::vector<std::string> drones;
  for (int i = 1; i <= 10; ++i) drones.push_back("uav-" + std::to_string(i));

  auto reasoner = swarmloop::agent::make_scripted_reasoner("coverage_with_tool");
  auto brief = brief_for("coverage_with_tool", drones);
  brief.user_params = json{{"width", 400.0},  {"height", 300.0}, {"origin_x", 0.0},
                           {"origin_y", 0.0}, {"n_drones", 10},  {"alt_min", 10.0},
                           {"alt_max", 120.0}, {"fov_deg", 90.0}};
  const auto trace = run_mission(brief, *reasoner, *rig.gw, PromptSet::builtin());

  check_flight_clean(rig, trace, drones);
  CHECK(trace.plan_kind == "coverage");
  REQUIRE(trace.plan.is_object());
  CHECK(trace.plan.at("rows") == 3);
  CHECK(trace.plan.at("cols") == 4);
  CHECK(trace.plan.at("slots").size() == 10);

  // Every drone parked on a distinct slot before landing: each slot has
  // exactly one drone's final ground position on it.
  std::vector<std::pair<double, double>> finals;
  for (const auto& id : drones) {
    const auto d = rig.world.drone(id);
    finals.push_back({d.position.x, d.position.y});
  }
  for (const auto& slot : trace.plan.at("slots")) {
    const double sx = slot.at("x").get<double>();
    const double sy = slot.at("y").get<double>();
    int close = 0;
    for (const auto& f : finals)
      if (std::hypot(f.first - sx, f.second - sy) < 0.01) ++close;
    CHECK(close == 1);
  }
}

TEST_CASE("scripted flight: coverage planned internally when no planner is offered") {
  GatewayConfig gcfg;
  gcfg.helper_tools = true;  // no planning tools
  Rig rig(gcfg, 4);

  std::vector<std::string> drones{"uav-1", "uav-2", "uav-3", "uav-4"};
  auto reasoner = swarmloop::agent::make_scripted_reasoner(
      "coverage_no_tool", json{{"width", 200.0}, {"height", 150.0}});
  auto brief = brief_for("coverage_no_tool", drones);
  const auto trace = run_mission(brief, *reasoner, *rig.gw, PromptSet::builtin());

  check_flight_clean(rig, trace, drones);
  CHECK(trace.plan.is_null());  // nothing went through a planner tool
  CHECK(trace.plan_kind.empty());

  // The internally computed grid covers the requested region: all four
  // drones ended strictly inside it.
  for (const auto& id : drones) {
    const auto d = rig.world.drone(id);
    CHECK(d.position.x > 0.0);
    CHECK(d.position.x < 200.0);
    CHECK(d.position.y > 0.0);
    CHECK(d.position.y < 150.0);
  }

  // No planner tool existed, so no call ever named one.
  for (const auto& rec : trace.iterations)
    for (const auto& call : rec.step.tool_calls) {
      CHECK(call.tool != "plan_area_coverage");
      CHECK(call.tool != "plan_drone_formation");
    }
}

TEST_CASE("scripted flight: star formation with per-drone slot assignment, helpers off") {
  GatewayConfig gcfg;
  gcfg.planning_tools = true;
  Rig rig(gcfg, 10);

  std::vector<std::string> drones;
  for (int i = 1; i <= 10; ++i) drones.push_back("uav-" + std::to_string(i));

  auto reasoner = swarmloop::agent::make_scripted_reasoner(
      "formation", json{{"shape", "star"}, {"center_x", 200.0}, {"center_y", 150.0},
                        {"spacing", 6.0}, {"altitude", 12.0}});
  auto brief = brief_for("formation", drones);
  const auto trace = run_mission(brief, *reasoner, *rig.gw, PromptSet::builtin());

  check_flight_clean(rig, trace, drones);
  CHECK(trace.plan_kind == "formation");
  REQUIRE(trace.plan.is_object());
  CHECK(trace.plan.at("shape") == "star");
  CHECK(trace.plan.at("slots").size() == 10);
  REQUIRE(trace.plan.contains("assignment"));

  // The landed fleet forms the planned star (compared on the ground plane).
  auto plan = swarmloop::plan::FormationPlan::from_json(trace.plan);
  for (auto& s : plan.slots) s.alt = 0.0;
  std::vector<swarmloop::Vec3> finals;
  for (const auto& id : drones) {
    const auto d = rig.world.drone(id);
    finals.push_back({d.position.x, d.position.y, 0.0});
  }
  CHECK(swarmloop::plan::detect_star(finals, plan, 0.5));

  // Helpers were off: navigation went through individual action calls.
  for (const auto& rec : trace.iterations)
    for (const auto& call : rec.step.tool_calls)
      CHECK(call.tool.rfind("wait_until_", 0) != 0);
}

TEST_CASE("scripted flight: irrigation survey reads sensors and decides") {
  GatewayConfig gcfg;
  gcfg.helper_tools = true;
  std::vector<sim::DeviceSpec> devices{
      {"hum-1", sim::DeviceKind::humidity_sensor, 60.0, 60.0, 30.0, 11},
      {"hum-2", sim::DeviceKind::humidity_sensor, 120.0, 60.0, 30.0, 12},
      {"hum-3", sim::DeviceKind::humidity_sensor, 180.0, 60.0, 30.0, 13},
      {"temp-1", sim::DeviceKind::temperature_sensor, 120.0, 120.0, 30.0, 14},
      {"valve-1", sim::DeviceKind::irrigation_actuator, 120.0, 90.0, 30.0, 15},
  };
  Rig rig(gcfg, 6, devices);

  std::vector<std::string> drones;
  for (int i = 1; i <= 6; ++i) drones.push_back("uav-" + std::to_string(i));

  auto reasoner = swarmloop::agent::make_scripted_reasoner(
      "irrigation", json{{"humidity_threshold", 57.0}, {"temperature_threshold", 30.0}});
  auto brief = brief_for("irrigation", drones);
  const auto trace = run_mission(brief, *reasoner, *rig.gw, PromptSet::builtin());

  // Only the four sensor-visiting drones flew.
  check_flight_clean(rig, trace, {"uav-1", "uav-2", "uav-3", "uav-4"});
  CHECK_FALSE(rig.world.drone("uav-5").ever_airborne);
  CHECK_FALSE(rig.world.drone("uav-6").ever_airborne);

  // Ground truth: mean humidity and the temperature reading decide the valve.
  double hum = 0.0;
  for (const auto* id : {"hum-1", "hum-2", "hum-3"})
    hum += rig.world.device(id).last_reading.value();
  hum /= 3.0;
  const double temp = rig.world.device("temp-1").last_reading.value();
  const bool should_trigger = hum <= 57.0 || temp >= 30.0;
  CHECK(rig.world.device("valve-1").triggered == should_trigger);
  CHECK(trace.final_text->find("Irrigation survey complete") != std::string::npos);
  CHECK(trace.final_text->find(should_trigger ? "was required" : "not required") !=
        std::string::npos);
}

TEST_CASE("scripted flight: the same mission twice yields byte-identical traces") {
  const auto run_once = [] {
    GatewayConfig gcfg;
    gcfg.planning_tools = true;
    gcfg.helper_tools = true;
    Rig rig(gcfg, 6);
    std::vector<std::string> drones;
    for (int i = 1; i <= 6; ++i) drones.push_back("uav-" + std::to_string(i));
    auto reasoner = swarmloop::agent::make_scripted_reasoner("coverage_with_tool");
    auto brief = brief_for("coverage_with_tool", drones);
    brief.user_params = json{{"n_drones", 6}};
    return run_mission(brief, *reasoner, *rig.gw, PromptSet::builtin()).to_json().dump();
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("scripted reasoner: rejects unknown missions, reports unavailable planners") {
  CHECK_THROWS_AS(swarmloop::agent::make_scripted_reasoner("patrol"), DomainError);

  // coverage_with_tool against a gateway without planning tools: the flight
  // is aborted honestly instead of improvising, with the fleet's state
  // checked on the way out so the conclusion rests on observation.
  Rig rig(GatewayConfig{}, 2);
  auto reasoner = swarmloop::agent::make_scripted_reasoner("coverage_with_tool");
  auto brief = brief_for("coverage_with_tool", {"uav-1", "uav-2"});
  const auto trace = run_mission(brief, *reasoner, *rig.gw, PromptSet::builtin());
  CHECK(trace.termination == Termination::completed);
  REQUIRE(trace.final_text.has_value());
  CHECK(trace.final_text->find("aborted") != std::string::npos);
  CHECK(trace.final_text->find("planner unavailable") != std::string::npos);
  CHECK_FALSE(rig.world.drone("uav-1").ever_airborne);
  CHECK(trace.plan.is_null());
  for (const auto& rec : trace.iterations) CHECK(rec.injected.empty());
}

TEST_CASE("remote reasoner: text completions, tool calls, malformed arguments") {
  StubBackend backend({
      {200, chat_tool_call("t1", "list_web_things", R"({"query":"$.actions.takeoff"})")},
      {200, chat_tool_call("t2", "call_web_thing_action", "{broken")},
      {200, chat_tool_call("t3", "call_web_thing_action", "[1,2,3]")},
      {200, chat_text("all finished", false)},
  });
  auto reasoner = swarmloop::agent::make_remote_reasoner(backend.config());
  reasoner->seed(42);

  AgentContext ctx;
  ctx.messages.push_back({Role::system, "core", {}, std::nullopt});
  ctx.messages.push_back({Role::user, "mission", {}, std::nullopt});

  auto s1 = reasoner->step(ctx, {});
  REQUIRE(s1.tool_calls.size() == 1);
  CHECK(s1.tool_calls[0].call_id == "t1");
  CHECK(s1.tool_calls[0].tool == "list_web_things");
  CHECK(s1.tool_calls[0].arguments == json{{"query", "$.actions.takeoff"}});
  CHECK_FALSE(s1.final_text.has_value());  // text alongside calls is dropped
  CHECK(s1.valid());
  CHECK(s1.usage.provided);
  CHECK(s1.usage.prompt_tokens == 90);
  CHECK(s1.usage.completion_tokens == 15);
  CHECK(reasoner->count_tokens("anything") == std::nullopt);

  auto s2 = reasoner->step(ctx, {});
  CHECK(s2.tool_calls.empty());
  REQUIRE(s2.malformed.size() == 1);
  CHECK(s2.malformed[0].call_id == "t2");
  CHECK(s2.malformed[0].raw == "{broken");
  CHECK(s2.valid());

  auto s3 = reasoner->step(ctx, {});
  REQUIRE(s3.malformed.size() == 1);  // parses, but is not an object
  CHECK(s3.malformed[0].raw == "[1,2,3]");

  auto s4 = reasoner->step(ctx, {});
  REQUIRE(s4.final_text.has_value());
  CHECK(*s4.final_text == "all finished");
  CHECK_FALSE(s4.usage.provided);

  // The requests carried the context, the declared tools, and the seed.
  const auto req = backend.request(0);
  CHECK(req.at("model") == "stub-model");
  CHECK(req.at("seed") == 42);
  REQUIRE(req.at("messages").size() == 2);
  CHECK(req.at("messages")[0].at("role") == "system");
  CHECK(req.at("messages")[1].at("content") == "mission");
  CHECK_FALSE(req.contains("tools"));
}

TEST_CASE("remote reasoner: retries transient failures, rejects client errors") {
  {
    StubBackend flaky({{500, "oops"}, {200, chat_text("recovered")}});
    auto cfg = flaky.config();
    cfg.max_retries = 3;
    auto reasoner = swarmloop::agent::make_remote_reasoner(cfg);
    AgentContext ctx;
    ctx.messages.push_back({Role::user, "hi", {}, std::nullopt});
    const auto step = reasoner->step(ctx, {});
    CHECK(step.final_text == std::string("recovered"));
    CHECK(flaky.hits() == 2);
  }
  {
    StubBackend dead({{500, "oops"}});
    auto cfg = dead.config();
    cfg.max_retries = 2;
    auto reasoner = swarmloop::agent::make_remote_reasoner(cfg);
    AgentContext ctx;
    ctx.messages.push_back({Role::user, "hi", {}, std::nullopt});
    try {
      reasoner->step(ctx, {});
      FAIL("expected ReasonerFailure");
    } catch (const DomainError& e) {
      CHECK(e.code() == "ReasonerFailure");
    }
    CHECK(dead.hits() == 3);  // initial try + two retries
  }
  {
    StubBackend reject({{401, "no key"}});
    auto cfg = reject.config();
    auto reasoner = swarmloop::agent::make_remote_reasoner(cfg);
    AgentContext ctx;
    ctx.messages.push_back({Role::user, "hi", {}, std::nullopt});
    CHECK_THROWS_AS(reasoner->step(ctx, {}), DomainError);
    CHECK(reject.hits() == 1);  // 4xx never retries
  }
  {
    StubBackend garbled({{200, "this is not json"}, {200, chat_text("eventually")}});
    auto reasoner = swarmloop::agent::make_remote_reasoner(garbled.config());
    AgentContext ctx;
    ctx.messages.push_back({Role::user, "hi", {}, std::nullopt});
    const auto step = reasoner->step(ctx, {});
    CHECK(step.final_text == std::string("eventually"));
    CHECK(garbled.hits() == 2);
  }
}

TEST_CASE("remote reasoner: drives the mission loop end to end") {
  StubBackend backend({
      {200, chat_tool_call(
                "t1", "read_web_thing_property",
                R"({"thing":"uav-1","property":"armed"})")},
      {200, chat_text("Survey complete; the fleet never left the ground.")},
  });
  auto reasoner = swarmloop::agent::make_remote_reasoner(backend.config());
  reasoner->seed(7);

  Rig rig;
  auto brief = brief_for("coverage_with_tool", {"uav-1"});
  const auto trace = run_mission(brief, *reasoner, *rig.gw, PromptSet::builtin());

  CHECK(trace.termination == Termination::completed);
  CHECK(trace.final_text == std::string("Survey complete; the fleet never left the ground."));
  REQUIRE(trace.iterations.size() == 2);
  CHECK(trace.iterations[0].results[0].ok());

  // Provider-reported totals land in the ledger unattributed (no counter).
  CHECK(trace.tokens.iterations[0].prompt_tokens == 90);
  CHECK_FALSE(trace.tokens.iterations[0].estimated);
  CHECK_FALSE(trace.tokens.iterations[0].prompt_components.has_value());

  // The second request replayed the whole exchange: system, user, the
  // assistant's tool call, and the tool result keyed by its call id.
  REQUIRE(backend.hits() == 2);
  const auto req = backend.request(1);
  const auto& messages = req.at("messages");
  REQUIRE(messages.size() == 4);
  CHECK(messages[0].at("role") == "system");
  CHECK(messages[1].at("role") == "user");
  CHECK(messages[2].at("role") == "assistant");
  REQUIRE(messages[2].contains("tool_calls"));
  CHECK(messages[2].at("tool_calls")[0].at("id") == "t1");
  CHECK(messages[3].at("role") == "tool");
  CHECK(messages[3].at("tool_call_id") == "t1");
  CHECK(json::parse(messages[3].at("content").get<std::string>()).at("status") == "ok");
  CHECK(req.at("seed") == 7);

  // The gateway's four core tools were declared to the backend.
  REQUIRE(req.contains("tools"));
  std::set<std::string> names;
  for (const auto& t : req.at("tools")) names.insert(t.at("function").at("name"));
  CHECK(names.count("read_web_thing_property") == 1);
  CHECK(names.count("call_web_thing_action") == 1);
}

TEST_CASE("remote config: environment is the only credential source") {
  // Isolate from whatever the environment holds.
  unsetenv("SWARMLOOP_LLM_ENDPOINT");
  unsetenv("SWARMLOOP_LLM_MODEL");
  CHECK_THROWS_AS(swarmloop::agent::remote_config_from_env(), DomainError);

  setenv("SWARMLOOP_LLM_ENDPOINT", "http://127.0.0.1:9", 1);
  setenv("SWARMLOOP_LLM_MODEL", "test-model", 1);
  setenv("SWARMLOOP_LLM_API_KEY", "sk-test", 1);
  setenv("SWARMLOOP_LLM_TIMEOUT_S", "30", 1);
  setenv("SWARMLOOP_LLM_MAX_RETRIES", "1", 1);
  const auto cfg = swarmloop::agent::remote_config_from_env();
  CHECK(cfg.endpoint == "http://127.0.0.1:9");
  CHECK(cfg.model == "test-model");
  CHECK(cfg.api_key == "sk-test");
  CHECK(cfg.timeout_s == 30.0);
  CHECK(cfg.max_retries == 1);
  CHECK(cfg.path == "/v1/chat/completions");
  unsetenv("SWARMLOOP_LLM_ENDPOINT");
  unsetenv("SWARMLOOP_LLM_MODEL");
  unsetenv("SWARMLOOP_LLM_API_KEY");
  unsetenv("SWARMLOOP_LLM_TIMEOUT_S");
  unsetenv("SWARMLOOP_LLM_MAX_RETRIES");
}

TEST_CASE("message and step serialization round-trips") {
  Message m{Role::assistant, "checking",
            {make_call("c1", "list_web_things", json{{"full", true}})}, std::nullopt};
  const auto m2 = Message::from_json(m.to_json());
  CHECK(m2.role == Role::assistant);
  CHECK(m2.content == "checking");
  REQUIRE(m2.tool_calls.size() == 1);
  CHECK(m2.tool_calls[0].arguments == json{{"full", true}});

  Message t{Role::tool, "{}", {}, std::string("c1")};
  CHECK(Message::from_json(t.to_json()).call_id == std::string("c1"));

  ReasonerStep s;
  s.tool_calls.push_back(make_call("c2", "read_web_thing_property",
                                   json{{"thing", "uav-1"}, {"property", "mode"}}));
  s.malformed.push_back({"c3", "call_web_thing_action", "oops"});
  s.usage.provided = false;
  const auto s2 = ReasonerStep::from_json(s.to_json());
  CHECK(s2.tool_calls.size() == 1);
  REQUIRE(s2.malformed.size() == 1);
  CHECK(s2.malformed[0].raw == "oops");
  CHECK_FALSE(s2.usage.provided);
  CHECK(s2.to_json() == s.to_json());

  CHECK(swarmloop::agent::termination_from_string("completed") == Termination::completed);
  CHECK(swarmloop::agent::to_string(Termination::infeasible) == "infeasible");
  CHECK_THROWS_AS(swarmloop::agent::termination_from_string("gave_up"), DomainError);
  CHECK_THROWS_AS(swarmloop::agent::role_from_string("narrator"), DomainError);
}
