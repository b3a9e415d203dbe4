#pragma once

#include <memory>

#include "swarmloop/agent/agent.hpp"

namespace swarmloop::agent {

/// Deterministic oracle policy that drives a mission's intended flow through
/// gateway tools only: discover, plan (by tool when listed, internally
/// otherwise), arm and take off on separated altitude layers, navigate,
/// verify completion via observed state, land, confirm disarm, conclude.
/// Emits synthetic usage from the shared character-count estimator so token
/// accounting is exercised end to end.
///
/// mission_params mirrors the values rendered into the user prompt: region
/// geometry and bounds for coverage, formation layout, decision thresholds
/// for irrigation. Missing keys fall back to the experiment defaults.
/// Throws DomainError("UnsupportedMission") for an unknown mission kind.
std::unique_ptr<Reasoner> make_scripted_reasoner(const std::string& mission_kind,
                                                 json mission_params = json::object());

}  // namespace swarmloop::agent
