#include "swarmloop/agent/prompts.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

namespace swarmloop::agent {

namespace {

constexpr const char* kCoreText =
    "You coordinate a fleet of multirotor UAVs and their ground devices.\n"
    "Operating rules:\n"
    "- Interact with the world only through the registered tools; never assume an\n"
    "  effect you have not observed through a tool result.\n"
    "- Discover the available Things through the directory before acting on them.\n"
    "- Verify state by reading properties before declaring any objective complete;\n"
    "  an acknowledged action is not a completed action.\n"
    "- Keep flying drones separated by a safe distance at all times and avoid\n"
    "  unnecessary movement or battery use.\n"
    "- A mission may end only when every drone that flew is back on the ground and\n"
    "  disarmed; confirm this by reading each drone's state.\n"
    "- Prefer the planning services for geometry when they are available instead of\n"
    "  improvising coordinates.\n"
    "- When the objective is verifiably met, reply with a short completion summary\n"
    "  and no further tool calls.\n";

constexpr const char* kUserCoverageWithTool =
    "Survey the rectangular region that spans {width} m by {height} m starting at\n"
    "({origin_x}, {origin_y}) using the {n_drones} available UAVs. Flight altitude\n"
    "must stay between {alt_min} m and {alt_max} m; every camera has a {fov_deg}\n"
    "degree field of view. Ask the area-coverage planning service for vantage\n"
    "points, send each drone to its assigned point, verify every arrival, then\n"
    "land the fleet and confirm each vehicle is disarmed.\n";

constexpr const char* kUserCoverageNoTool =
    "Survey the rectangular region that spans {width} m by {height} m starting at\n"
    "({origin_x}, {origin_y}) using the {n_drones} available UAVs. Flight altitude\n"
    "must stay between {alt_min} m and {alt_max} m; every camera has a {fov_deg}\n"
    "degree field of view. No planning service is available: derive the waypoint\n"
    "layout yourself from the region geometry, the altitude bounds, and the camera\n"
    "field of view, then execute it, land the fleet, and confirm each vehicle is\n"
    "disarmed.\n";

constexpr const char* kUserFormation =
    "Arrange the {n_drones} available UAVs into a {shape} formation centered at\n"
    "({center_x}, {center_y}) with {spacing} m spacing at {altitude} m altitude.\n"
    "Use the formation planning service for the slot geometry and assign drones to\n"
    "slots so that total displacement is maximized. Maintain safe separation while\n"
    "moving. Once every drone holds its slot, land the fleet and confirm each\n"
    "vehicle is disarmed.\n";

constexpr const char* kUserIrrigation =
    "Collect one reading from every ground sensor (three humidity sensors and one\n"
    "temperature sensor); a drone must be within a sensor's communication range to\n"
    "read it. Then decide whether irrigation is needed: trigger the irrigation\n"
    "actuator if and only if the mean humidity is at most {humidity_threshold}\n"
    "percent or the temperature is at least {temperature_threshold} degrees C.\n"
    "Afterwards land every drone that flew and confirm each one is disarmed.\n";

constexpr const char* kGuardrailUnverified =
    "Completion was declared without a recent check of the vehicles' state. Read\n"
    "the relevant drone properties (armed, airborne, mode, position) to confirm\n"
    "the objective actually holds before concluding.\n";

constexpr const char* kGuardrailStalled =
    "The last several iterations repeated the same tool calls and received\n"
    "identical results; no progress is being made. Re-read the system state,\n"
    "reconsider the remaining steps, and issue a different action.\n";

constexpr const char* kGuardrailUnsafe =
    "Do not terminate: at least one drone is still armed or airborne. Land or\n"
    "recall every active drone, confirm each one is disarmed by reading its state,\n"
    "and only then conclude the mission.\n";

constexpr std::array<const char*, 4> kMissionKinds = {
    "coverage_with_tool", "coverage_no_tool", "formation", "irrigation"};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("PromptLoadError", "cannot open prompt file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string param_text(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

}  // namespace

std::string to_string(GuardrailId id) {
  switch (id) {
    case GuardrailId::unverified_completion: return "unverified_completion";
    case GuardrailId::stalled_execution: return "stalled_execution";
    case GuardrailId::unsafe_termination: return "unsafe_termination";
  }
  return "?";
}

GuardrailId guardrail_from_string(const std::string& s) {
  if (s == "unverified_completion") return GuardrailId::unverified_completion;
  if (s == "stalled_execution") return GuardrailId::stalled_execution;
  if (s == "unsafe_termination") return GuardrailId::unsafe_termination;
  throw DomainError("UnknownGuardrail", "no guardrail named " + s);
}

std::string to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::core: return "core";
    case PromptKind::user: return "user";
    case PromptKind::guardrail: return "guardrail";
  }
  return "?";
}

bool is_mission_kind(const std::string& kind) {
  for (const auto* k : kMissionKinds)
    if (kind == k) return true;
  return false;
}

std::string render_template(const std::string& text, const json& params) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_'))
      ++j;
    if (j < text.size() && text[j] == '}' && j > i + 1) {
      const std::string key = text.substr(i + 1, j - i - 1);
      if (params.is_object() && params.contains(key)) {
        out += param_text(params.at(key));
        i = j + 1;
        continue;
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

PromptSet PromptSet::builtin() {
  PromptSet set;
  set.core = {PromptKind::core, kCoreText, std::nullopt};
  set.user_templates["coverage_with_tool"] = kUserCoverageWithTool;
  set.user_templates["coverage_no_tool"] = kUserCoverageNoTool;
  set.user_templates["formation"] = kUserFormation;
  set.user_templates["irrigation"] = kUserIrrigation;
  set.guardrails[GuardrailId::unverified_completion] = {
      PromptKind::guardrail, kGuardrailUnverified, GuardrailId::unverified_completion};
  set.guardrails[GuardrailId::stalled_execution] = {
      PromptKind::guardrail, kGuardrailStalled, GuardrailId::stalled_execution};
  set.guardrails[GuardrailId::unsafe_termination] = {
      PromptKind::guardrail, kGuardrailUnsafe, GuardrailId::unsafe_termination};
  return set;
}

PromptSet PromptSet::load(const std::string& dir) {
  PromptSet set;
  set.core = {PromptKind::core, read_file(dir + "/core.txt"), std::nullopt};
  for (const auto* kind : kMissionKinds)
    set.user_templates[kind] = read_file(dir + "/user/" + kind + ".txt");
  for (auto id : {GuardrailId::unverified_completion, GuardrailId::stalled_execution,
                  GuardrailId::unsafe_termination}) {
    set.guardrails[id] = {PromptKind::guardrail,
                          read_file(dir + "/guardrails/" + to_string(id) + ".txt"), id};
  }
  return set;
}

PromptArtifact PromptSet::render_user(const std::string& mission_kind,
                                      const json& params) const {
  const auto it = user_templates.find(mission_kind);
  if (it == user_templates.end())
    throw DomainError("UnknownMission", "no user prompt template for mission kind " +
                                            mission_kind);
  return {PromptKind::user, render_template(it->second, params), std::nullopt};
}

}  // namespace swarmloop::agent
