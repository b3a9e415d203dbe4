#pragma once

#include <map>
#include <optional>
#include <string>

#include "swarmloop/common.hpp"

namespace swarmloop::agent {

enum class GuardrailId { unverified_completion, stalled_execution, unsafe_termination };

std::string to_string(GuardrailId id);
GuardrailId guardrail_from_string(const std::string& s);  // throws UnknownGuardrail

enum class PromptKind { core, user, guardrail };

std::string to_string(PromptKind kind);

/// A prompt fragment with a fixed lifecycle: core and user text never change
/// within a run; guardrail fragments are injected conditionally at runtime.
struct PromptArtifact {
  PromptKind kind = PromptKind::core;
  std::string text;
  std::optional<GuardrailId> guardrail_id;  // set iff kind == guardrail
};

bool is_mission_kind(const std::string& kind);

/// Fills {name} placeholders from a flat JSON object. Strings insert raw,
/// other values insert their JSON form; unknown placeholders stay verbatim.
std::string render_template(const std::string& text, const json& params);

/// The complete prompt inventory for a run: one core prompt, one user
/// template per mission kind, one fragment per guardrail.
struct PromptSet {
  PromptArtifact core;
  std::map<std::string, std::string> user_templates;  // mission kind -> template
  std::map<GuardrailId, PromptArtifact> guardrails;

  /// Compiled-in defaults, identical to the files shipped under prompts/.
  static PromptSet builtin();

  /// Loads core.txt, user/<kind>.txt, guardrails/<id>.txt from a directory.
  /// Throws PromptLoadError when any expected file is missing or unreadable.
  static PromptSet load(const std::string& dir);

  /// Renders the user template for the mission kind. Throws UnknownMission.
  PromptArtifact render_user(const std::string& mission_kind, const json& params) const;
};

}  // namespace swarmloop::agent
