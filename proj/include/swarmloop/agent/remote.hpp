#pragma once

#include <memory>
#include <string>

#include "swarmloop/agent/agent.hpp"

namespace swarmloop::agent {

// Connection settings for an OpenAI-style chat-completions backend.
// Credentials come from the environment, never from config files.
struct RemoteConfig {
  std::string endpoint;                       // e.g. "http://127.0.0.1:8080"
  std::string path = "/v1/chat/completions";  // POST target on the endpoint
  std::string model;
  std::string api_key;     // sent as a bearer token when non-empty
  int max_retries = 3;     // transport errors, 5xx, unparseable bodies
  double backoff_s = 0.5;  // base of the exponential retry backoff
  double timeout_s = 120.0;
};

/// Reads SWARMLOOP_LLM_ENDPOINT, SWARMLOOP_LLM_MODEL, SWARMLOOP_LLM_API_KEY
/// and optional SWARMLOOP_LLM_PATH / SWARMLOOP_LLM_TIMEOUT_S /
/// SWARMLOOP_LLM_MAX_RETRIES. Throws DomainError("MissingConfig") when
/// endpoint or model is unset.
RemoteConfig remote_config_from_env();

/// A Reasoner backed by a remote chat-completions API. Tool calls whose
/// argument payloads fail to parse are surfaced as malformed (the loop turns
/// them into error results); assistant text arriving alongside tool calls is
/// dropped so a step either acts or concludes, never both. Token usage is
/// taken from the provider when reported, otherwise left for estimation.
std::unique_ptr<Reasoner> make_remote_reasoner(RemoteConfig config);

}  // namespace swarmloop::agent
