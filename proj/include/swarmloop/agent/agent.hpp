#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "swarmloop/agent/prompts.hpp"
#include "swarmloop/gateway/gateway.hpp"

namespace swarmloop::agent {

enum class Role { system, user, assistant, tool };

std::string to_string(Role role);
Role role_from_string(const std::string& s);  // throws UnknownRole

struct Message {
  Role role = Role::system;
  std::string content;
  std::vector<gateway::ToolCall> tool_calls;  // assistant messages only
  std::optional<std::string> call_id;         // tool messages: which call this answers

  json to_json() const;
  static Message from_json(const json& j);
};

/// The serialized form of a message as it enters the prompt; the unit all
/// token counting operates on, shared by reasoners and the ledger so the
/// two sides can never disagree.
std::string prompt_token_text(const Message& m);

/// ceil(chars / 4): the local fallback token estimator.
std::int64_t estimate_tokens(const std::string& text);

struct AgentContext {
  std::vector<Message> messages;  // append-only
  int iteration = 0;
  std::map<GuardrailId, int> injected_guardrails;

  json to_json() const;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  bool provided = false;  // true only when the backend reported real usage
};

/// A tool call the reasoner emitted but that could not be parsed into
/// arguments; fed back to the loop as an error result so the reasoner can
/// self-correct.
struct MalformedCall {
  std::string call_id;
  std::string tool;
  std::string raw;  // the unparseable argument text
};

/// One reasoner output: a step either acts (tool calls) or concludes
/// (final text), never both, never neither.
struct ReasonerStep {
  std::vector<gateway::ToolCall> tool_calls;
  std::vector<MalformedCall> malformed;
  std::optional<std::string> final_text;
  TokenUsage usage;

  bool acts() const { return !tool_calls.empty() || !malformed.empty(); }
  bool valid() const { return final_text.has_value() != acts(); }
  json to_json() const;
  static ReasonerStep from_json(const json& j);
};

struct PromptComponents {
  std::int64_t system = 0;
  std::int64_t user = 0;
  std::int64_t history = 0;
  std::int64_t toolout = 0;
  std::int64_t sum() const { return system + user + history + toolout; }
};

struct CompletionComponents {
  std::int64_t text = 0;
  std::int64_t toolcall = 0;
  std::int64_t sum() const { return text + toolcall; }
};

struct IterationTokens {
  int iteration = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::optional<PromptComponents> prompt_components;          // absent: unattributed
  std::optional<CompletionComponents> completion_components;  // absent: unattributed
  bool estimated = false;  // totals come from the local estimator, not the backend

  json to_json() const;
  static IterationTokens from_json(const json& j);
};

struct TokenLedger {
  std::vector<IterationTokens> iterations;

  std::int64_t total_prompt() const;
  std::int64_t total_completion() const;
  std::int64_t total() const;  // the per-run sum of prompt + completion

  json to_json() const;
  static TokenLedger from_json(const json& j);
};

class Reasoner {
public:
  virtual ~Reasoner() = default;

  /// One reasoning step over the current context and visible tools.
  /// Throws DomainError("ReasonerFailure", ...) when the backend is
  /// unreachable or unparseable after retries.
  virtual ReasonerStep step(const AgentContext& context,
                            const std::vector<gateway::ToolDefinition>& tools) = 0;

  /// Token counter for component attribution; nullopt when the backend
  /// exposes none (components are then recorded as unattributed).
  virtual std::optional<std::int64_t> count_tokens(const std::string& text) const {
    (void)text;
    return std::nullopt;
  }

  virtual void seed(std::uint64_t value) { (void)value; }
};

/// Splits one step's usage into the ledger: prompt components by bucketing
/// each prompt message with the reasoner's counter (system/user/history/tool
/// output), completion into text vs tool-call payload. Components are
/// attached only when their sums reproduce the recorded aggregates exactly;
/// absent backend usage falls back to the local estimator and is marked.
void record_usage(TokenLedger& ledger, const ReasonerStep& step,
                  const std::vector<Message>& prompt_messages, const Reasoner& reasoner,
                  int iteration);

enum class Termination { completed, infeasible, iteration_cap, error };

std::string to_string(Termination t);
Termination termination_from_string(const std::string& s);

struct IterationRecord {
  int iteration = 0;  // 1-based
  ReasonerStep step;
  std::vector<gateway::ToolResult> results;  // one per emitted call, in order
  std::vector<GuardrailId> injected;         // guardrails fired after this step
  double sim_time_after = 0.0;

  json to_json() const;
  static IterationRecord from_json(const json& j);
};

/// Full record of one run. Serialization carries simulated time only, so a
/// trace is byte-identical across repeats of a deterministic run.
struct RunTrace {
  std::string mission_id;
  std::string mission_kind;
  std::vector<IterationRecord> iterations;
  TokenLedger tokens;
  Termination termination = Termination::error;
  std::optional<std::string> final_text;
  std::optional<std::string> note;  // why a run ended without final text
  double sim_time_start = 0.0;
  double sim_time_end = 0.0;
  json plan;              // last successful plan payload, null when none
  std::string plan_kind;  // "coverage", "formation", or ""

  json to_json() const;
  static RunTrace from_json(const json& j);
};

struct GuardrailConfig {
  int verify_lookback_k = 5;  // iterations searched for a drone-state read
  int stall_window_n = 3;     // identical consecutive iterations that count as a stall
  int max_fires = 3;          // per guardrail; the next trigger ends the run
};

struct RunLimits {
  int max_iterations = 80;
  double sim_timeout_s = 1800.0;      // simulated seconds
  double iteration_advance_s = 5.0;   // sim time added after each acting step
};

struct MissionBrief {
  std::string mission_id;
  std::string kind;                    // one of the four mission kinds
  std::vector<std::string> drone_ids;  // drones the guardrails watch
  json user_params = json::object();   // fills the user prompt template
};

/// Evaluates the three guardrails against the newest iteration record
/// (history.back()): completion declared without a recent drone-state read,
/// a window of identical non-progressing iterations, and termination while a
/// watched drone is armed or airborne (probed via read_property).
std::vector<GuardrailId> evaluate_guardrails(
    const std::vector<IterationRecord>& history, const std::vector<std::string>& drone_ids,
    const std::function<json(const std::string&, const std::string&)>& read_property,
    const GuardrailConfig& cfg);

/// The reasoning-execution loop: context assembly, reasoner step, tool
/// execution through the gateway, guardrail evaluation and injection,
/// token accounting, and termination bookkeeping.
/// Throws DomainError("ReasonerFailure") when the reasoner's backend fails.
RunTrace run_mission(const MissionBrief& brief, Reasoner& reasoner, gateway::Gateway& gw,
                     const PromptSet& prompts, RunLimits limits = {},
                     GuardrailConfig guardrails = {});

/// Multi-target navigation shortcut. Requires helper tools on the gateway;
/// throws DomainError("HelperDisabled") otherwise. targets is an array of
/// {thing, x, y, alt}.
gateway::ToolResult helper_send_drones_to_positions(gateway::Gateway& gw, const json& targets,
                                                    const std::string& call_id);

/// Observation-only wait shortcut, kind in {armed, arrived, landed}.
/// Requires helper tools on the gateway; throws DomainError("HelperDisabled")
/// otherwise.
gateway::ToolResult helper_wait_until(gateway::Gateway& gw, const std::string& kind,
                                      const std::vector<std::string>& drone_ids,
                                      double timeout_s, const std::string& call_id);

}  // namespace swarmloop::agent
