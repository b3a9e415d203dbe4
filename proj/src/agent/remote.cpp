#include "swarmloop/agent/remote.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include "httplib.h"

namespace swarmloop::agent {

namespace {

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : fallback;
}

class RemoteReasoner final : public Reasoner {
public:
  explicit RemoteReasoner(RemoteConfig config) : config_(std::move(config)) {}

  void seed(std::uint64_t s) override { seed_ = s; }

  ReasonerStep step(const AgentContext& ctx,
                    const std::vector<gateway::ToolDefinition>& tools) override {
    const std::string body = build_request(ctx, tools).dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0 && config_.backoff_s > 0.0) {
        const double delay = config_.backoff_s * static_cast<double>(1 << (attempt - 1));
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      }
      httplib::Client client(config_.endpoint);
      client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_s));
      client.set_read_timeout(std::chrono::duration<double>(config_.timeout_s));

      httplib::Headers headers;
      if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);

      auto res = client.Post(config_.path, headers, body, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "server error: HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        // Client-side errors will not heal on retry.
        throw DomainError("ReasonerFailure",
                          "backend rejected the request: HTTP " +
                              std::to_string(res->status) + " " + res->body);
      }
      json doc;
      try {
        doc = json::parse(res->body);
        return parse_step(doc);
      } catch (const json::exception& e) {
        last_error = std::string("unparseable response: ") + e.what();
        continue;
      }
    }
    throw DomainError("ReasonerFailure", last_error + " after " +
                                             std::to_string(config_.max_retries) + " retries");
  }

private:
  json build_request(const AgentContext& ctx,
                     const std::vector<gateway::ToolDefinition>& tools) const {
    json messages = json::array();
    for (const auto& m : ctx.messages) {
      json jm{{"role", to_string(m.role)}, {"content", m.content}};
      if (!m.tool_calls.empty()) {
        json calls = json::array();
        for (const auto& c : m.tool_calls)
          calls.push_back(json{{"id", c.call_id},
                               {"type", "function"},
                               {"function", json{{"name", c.tool},
                                                 {"arguments", c.arguments.dump()}}}});
        jm["tool_calls"] = std::move(calls);
      }
      if (m.role == Role::tool && m.call_id) jm["tool_call_id"] = *m.call_id;
      messages.push_back(std::move(jm));
    }

    json req{{"model", config_.model}, {"messages", std::move(messages)}};
    if (!tools.empty()) {
      json jt = json::array();
      for (const auto& t : tools)
        jt.push_back(json{{"type", "function"},
                          {"function", json{{"name", t.name},
                                            {"description", t.description},
                                            {"parameters", t.input_schema.to_json()}}}});
      req["tools"] = std::move(jt);
    }
    if (seed_) req["seed"] = *seed_;
    return req;
  }

  static ReasonerStep parse_step(const json& doc) {
    const auto& msg = doc.at("choices").at(0).at("message");
    ReasonerStep step;

    if (msg.contains("tool_calls") && msg.at("tool_calls").is_array() &&
        !msg.at("tool_calls").empty()) {
      for (const auto& c : msg.at("tool_calls")) {
        const auto id = c.at("id").get<std::string>();
        const auto& fn = c.at("function");
        const auto name = fn.at("name").get<std::string>();
        const auto raw = fn.at("arguments").get<std::string>();
        json args;
        try {
          args = json::parse(raw);
        } catch (const json::exception&) {
          step.malformed.push_back({id, name, raw});
          continue;
        }
        if (!args.is_object()) {
          step.malformed.push_back({id, name, raw});
          continue;
        }
        gateway::ToolCall call;
        call.call_id = id;
        call.tool = name;
        call.arguments = std::move(args);
        step.tool_calls.push_back(std::move(call));
      }
      // Text alongside tool calls is dropped: a step acts or concludes.
    } else {
      const auto& content = msg.contains("content") ? msg.at("content") : json();
      step.final_text = content.is_string() ? content.get<std::string>() : std::string();
    }

    if (doc.contains("usage") && doc.at("usage").is_object() &&
        doc.at("usage").contains("prompt_tokens") &&
        doc.at("usage").contains("completion_tokens")) {
      step.usage.provided = true;
      step.usage.prompt_tokens = doc.at("usage").at("prompt_tokens").get<std::int64_t>();
      step.usage.completion_tokens =
          doc.at("usage").at("completion_tokens").get<std::int64_t>();
    } else {
      step.usage.provided = false;
    }
    return step;
  }

  RemoteConfig config_;
  std::optional<std::uint64_t> seed_;
};

}  // namespace

RemoteConfig remote_config_from_env() {
  RemoteConfig cfg;
  cfg.endpoint = env_or("SWARMLOOP_LLM_ENDPOINT", "");
  cfg.model = env_or("SWARMLOOP_LLM_MODEL", "");
  if (cfg.endpoint.empty() || cfg.model.empty())
    throw DomainError("MissingConfig",
                      "SWARMLOOP_LLM_ENDPOINT and SWARMLOOP_LLM_MODEL must be set");
  cfg.api_key = env_or("SWARMLOOP_LLM_API_KEY", "");
  cfg.path = env_or("SWARMLOOP_LLM_PATH", cfg.path);
  const auto timeout = env_or("SWARMLOOP_LLM_TIMEOUT_S", "");
  if (!timeout.empty()) cfg.timeout_s = std::stod(timeout);
  const auto retries = env_or("SWARMLOOP_LLM_MAX_RETRIES", "");
  if (!retries.empty()) cfg.max_retries = std::stoi(retries);
  return cfg;
}

std::unique_ptr<Reasoner> make_remote_reasoner(RemoteConfig config) {
  return std::make_unique<RemoteReasoner>(std::move(config));
}

}  // namespace swarmloop::agent
