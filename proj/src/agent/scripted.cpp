#include "swarmloop/agent/scripted.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "swarmloop/plan/planners.hpp"

namespace swarmloop::agent {

namespace {

std::string trimmed_number(double v) { return json(v).dump(); }

class ScriptedReasoner final : public Reasoner {
public:
  ScriptedReasoner(std::string kind, json params)
      : kind_(std::move(kind)), params_(std::move(params)) {
    if (!is_mission_kind(kind_))
      throw DomainError("UnsupportedMission", "no scripted policy for mission kind " + kind_);
    if (!params_.is_object()) params_ = json::object();
  }

  ReasonerStep step(const AgentContext& ctx,
                    const std::vector<gateway::ToolDefinition>& tools) override {
    tool_names_.clear();
    for (const auto& def : tools) tool_names_.insert(def.name);

    if (started_) absorb(latest_results(ctx));
    started_ = true;

    ReasonerStep out = emit();
    out.usage.provided = true;
    out.usage.prompt_tokens = 0;
    for (const auto& m : ctx.messages) out.usage.prompt_tokens += *count_tokens(prompt_token_text(m));
    out.usage.completion_tokens = *count_tokens(out.final_text.value_or(""));
    for (const auto& c : out.tool_calls)
      out.usage.completion_tokens += *count_tokens(c.to_json().dump());
    return out;
  }

  std::optional<std::int64_t> count_tokens(const std::string& text) const override {
    return estimate_tokens(text);
  }

private:
  enum class Phase {
    discover,
    positions,
    plan,
    arm,
    takeoff,
    wait_takeoff,
    transit,
    wait_transit,
    settle,
    wait_settle,
    collect,
    act,
    land,
    wait_land,
    verify,
    conclude,
    abort_land,
    abort_wait,
    abort_verify,
    abort_conclude,
    done
  };

  struct SensorInfo {
    std::string id;
    bool humidity = false;
  };

  struct Point {
    double x = 0.0;
    double y = 0.0;
  };

  // --- parameter access with experiment defaults ---
  double p(const std::string& key, double fallback) const { return params_.value(key, fallback); }
  std::string ps(const std::string& key, const std::string& fallback) const {
    return params_.value(key, fallback);
  }

  bool has_tool(const std::string& name) const { return tool_names_.count(name) > 0; }
  bool use_helpers() const { return has_tool("send_drones_to_positions"); }

  std::string next_id() { return "s" + std::to_string(++seq_); }

  gateway::ToolCall call(const std::string& tool, json args) {
    gateway::ToolCall c;
    c.call_id = next_id();
    c.tool = tool;
    c.arguments = std::move(args);
    return c;
  }

  gateway::ToolCall action(const std::string& thing, const std::string& name,
                           json input = json::object()) {
    return call("call_web_thing_action",
                json{{"thing", thing}, {"action", name}, {"input", std::move(input)}});
  }

  gateway::ToolCall read(const std::string& thing, const std::string& property) {
    return call("read_web_thing_property", json{{"thing", thing}, {"property", property}});
  }

  // Most recent tool results: the trailing tool messages after the last
  // assistant turn, in emission order. Guardrail fragments (system role)
  // may trail them and are skipped.
  static std::vector<json> latest_results(const AgentContext& ctx) {
    std::vector<json> results;
    for (auto it = ctx.messages.rbegin(); it != ctx.messages.rend(); ++it) {
      if (it->role == Role::system) continue;
      if (it->role != Role::tool) break;
      results.push_back(json::parse(it->content));
    }
    std::reverse(results.begin(), results.end());
    return results;
  }

  static bool result_ok(const json& r) { return r.value("status", "") == "ok"; }

  double layer_alt(std::size_t idx) const { return settle_alt_ + 2.0 * (static_cast<double>(idx) + 1.0); }

  // Concluding, even to report failure, must rest on observed state: route
  // through a verification read when any drone is known.
  void abort_with(std::string note) {
    failure_note_ = std::move(note);
    aborting_ = true;
    phase_ = drones_.empty() ? Phase::abort_conclude : Phase::abort_verify;
  }

  void fail(const json& r) {
    auto note = r.value("error_code", std::string("UnknownError"));
    if (r.contains("error_detail")) note += ": " + r.at("error_detail").get<std::string>();
    if (aborting_) {
      // Already winding down; do not loop through more recovery.
      failure_note_ = std::move(note);
      phase_ = Phase::abort_conclude;
    } else if (!armed_any_) {
      abort_with(std::move(note));
    } else {
      failure_note_ = std::move(note);
      aborting_ = true;
      phase_ = Phase::abort_land;
    }
  }

  bool all_ok(const std::vector<json>& results) {
    for (const auto& r : results) {
      if (!result_ok(r)) {
        fail(r);
        return false;
      }
    }
    return true;
  }

  // --- absorb the previous phase's results and pick the next phase ---
  void absorb(const std::vector<json>& results) {
    if (phase_ == Phase::abort_land) {
      phase_ = Phase::abort_wait;
      return;
    }
    if (phase_ == Phase::abort_wait) {
      if (poll_complete(results, true)) phase_ = Phase::abort_conclude;
      return;
    }
    if (phase_ == Phase::abort_verify) {
      phase_ = Phase::abort_conclude;  // the reads only exist to be on record
      return;
    }
    if (!all_ok(results)) return;

    switch (phase_) {
      case Phase::discover: {
        for (const auto& t : results.at(0).at("payload").at("things"))
          drones_.push_back(t.at("id").get<std::string>());
        if (drones_.empty()) {
          abort_with("no drones discovered");
          return;
        }
        if (kind_ == "irrigation") {
          for (const auto& t : results.at(1).at("payload").at("things")) {
            SensorInfo s;
            s.id = t.at("id").get<std::string>();
            s.humidity = t.at("title").get<std::string>().rfind("Humidity", 0) == 0;
            sensors_.push_back(s);
          }
          std::sort(sensors_.begin(), sensors_.end(),
                    [](const SensorInfo& a, const SensorInfo& b) { return a.id < b.id; });
          const auto& actuators = results.at(2).at("payload").at("things");
          if (sensors_.empty() || actuators.empty() || drones_.size() < sensors_.size()) {
            abort_with("irrigation layout incomplete");
            return;
          }
          actuator_ = actuators.at(0).at("id").get<std::string>();
          active_.assign(drones_.begin(), drones_.begin() + sensors_.size());
          phase_ = Phase::positions;
        } else if (kind_ == "formation") {
          active_ = drones_;
          phase_ = Phase::positions;
        } else {
          active_ = drones_;
          if (kind_ == "coverage_no_tool") {
            const auto plan = plan::plan_area_coverage(
                {p("origin_x", 0.0), p("origin_y", 0.0), p("width", 400.0), p("height", 300.0)},
                static_cast<int>(active_.size()), deg_to_rad(p("fov_deg", 90.0)),
                p("alt_min", 10.0), p("alt_max", 120.0));
            settle_alt_ = plan.altitude;
            for (const auto& s : plan.slots) targets_.push_back({s.x, s.y});
            phase_ = Phase::arm;
          } else {
            phase_ = Phase::plan;
          }
        }
        break;
      }
      case Phase::positions: {
        if (kind_ == "formation") {
          for (const auto& r : results) {
            const auto& v = r.at("payload").at("value");
            positions_.push_back({v.at("x").get<double>(), v.at("y").get<double>()});
          }
          phase_ = Phase::plan;
        } else {  // irrigation sensor positions
          for (std::size_t i = 0; i < results.size(); ++i) {
            const auto& v = results[i].at("payload").at("value");
            targets_.push_back({v.at("x").get<double>(), v.at("y").get<double>()});
          }
          settle_alt_ = p("altitude", 10.0);
          phase_ = Phase::arm;
        }
        break;
      }
      case Phase::plan: {
        const auto& payload = results.at(0).at("payload");
        if (kind_ == "formation") {
          const auto& slots = payload.at("slots");
          const auto& perm = payload.at("assignment").at("permutation");
          for (std::size_t i = 0; i < active_.size(); ++i) {
            const auto& s = slots.at(perm.at(i).get<std::size_t>());
            targets_.push_back({s.at("x").get<double>(), s.at("y").get<double>()});
          }
          settle_alt_ = slots.at(0).at("alt").get<double>();
        } else {
          for (const auto& s : payload.at("slots"))
            targets_.push_back({s.at("x").get<double>(), s.at("y").get<double>()});
          settle_alt_ = payload.at("altitude").get<double>();
        }
        phase_ = Phase::arm;
        break;
      }
      case Phase::arm:
        armed_any_ = true;
        phase_ = Phase::takeoff;
        break;
      case Phase::takeoff:
        phase_ = Phase::wait_takeoff;
        break;
      case Phase::wait_takeoff:
        if (poll_complete(results, false)) phase_ = Phase::transit;
        break;
      case Phase::transit:
        phase_ = Phase::wait_transit;
        break;
      case Phase::wait_transit:
        if (poll_complete(results, false)) phase_ = Phase::settle;
        break;
      case Phase::settle:
        phase_ = Phase::wait_settle;
        break;
      case Phase::wait_settle:
        if (poll_complete(results, false))
          phase_ = kind_ == "irrigation" ? Phase::collect : Phase::land;
        break;
      case Phase::collect: {
        double humidity_sum = 0.0;
        int humidity_n = 0;
        for (std::size_t i = 0; i < sensors_.size(); ++i) {
          const double v =
              results.at(i).at("payload").at("result").at("value").get<double>();
          readings_[sensors_[i].id] = v;
          if (sensors_[i].humidity) {
            humidity_sum += v;
            ++humidity_n;
          } else {
            temperature_ = v;
          }
        }
        humidity_mean_ = humidity_n > 0 ? humidity_sum / humidity_n : 0.0;
        required_ = humidity_mean_ <= p("humidity_threshold", 57.0) ||
                    temperature_ >= p("temperature_threshold", 30.0);
        phase_ = required_ ? Phase::act : Phase::land;
        break;
      }
      case Phase::act:
        phase_ = Phase::land;
        break;
      case Phase::land:
        phase_ = Phase::wait_land;
        break;
      case Phase::wait_land:
        if (poll_complete(results, true)) phase_ = Phase::verify;
        break;
      case Phase::verify: {
        bool safe = true;
        for (std::size_t i = 0; i < active_.size(); ++i) {
          const bool armed = results.at(2 * i).at("payload").at("value").get<bool>();
          const auto mode = results.at(2 * i + 1).at("payload").at("value").get<std::string>();
          if (armed || (mode != "LAND" && mode != "RTL")) safe = false;
        }
        if (safe) phase_ = Phase::conclude;
        // Otherwise poll the same verification reads again.
        break;
      }
      case Phase::conclude:
      case Phase::abort_conclude:
      case Phase::done:
        phase_ = Phase::done;
        break;
      default:
        break;
    }
  }

  // Poll results: either one helper wait ({satisfied, ...}) or one
  // action_status read per active drone. tolerate_failed is for landing
  // waits, where a failed land means the drone never left the ground.
  bool poll_complete(const std::vector<json>& results, bool tolerate_failed) {
    if (results.size() == 1 && results.at(0).at("payload").contains("satisfied"))
      return results.at(0).at("payload").at("satisfied").get<bool>();
    for (const auto& r : results) {
      const auto& v = r.at("payload").at("value");
      const auto state = v.value("state", std::string("idle"));
      if (state == "failed") {
        if (tolerate_failed) continue;
        fail(json{{"error_code", "ActionFailed"},
                  {"error_detail", v.value("action", std::string()) + " did not complete"}});
        return false;
      }
      if (state != "completed") return false;
    }
    return true;
  }

  // --- emit the calls (or final text) for the current phase ---
  ReasonerStep emit() {
    ReasonerStep step;
    switch (phase_) {
      case Phase::discover: {
        step.tool_calls.push_back(call("list_web_things", json{{"query", "$.actions.takeoff"}}));
        if (kind_ == "irrigation") {
          step.tool_calls.push_back(call("list_web_things", json{{"query", "$.actions.sample"}}));
          step.tool_calls.push_back(
              call("list_web_things", json{{"query", "$.actions.trigger"}}));
        }
        break;
      }
      case Phase::positions: {
        if (kind_ == "formation") {
          for (const auto& id : active_) step.tool_calls.push_back(read(id, "position"));
        } else {
          for (const auto& s : sensors_) step.tool_calls.push_back(read(s.id, "position"));
        }
        break;
      }
      case Phase::plan: {
        if (kind_ == "coverage_with_tool") {
          if (!has_tool("plan_area_coverage")) return give_up("coverage planner unavailable");
          step.tool_calls.push_back(
              call("plan_area_coverage",
                   json{{"origin_x", p("origin_x", 0.0)},
                        {"origin_y", p("origin_y", 0.0)},
                        {"width", p("width", 400.0)},
                        {"height", p("height", 300.0)},
                        {"n", static_cast<int>(active_.size())},
                        {"fov_deg", p("fov_deg", 90.0)},
                        {"alt_min", p("alt_min", 10.0)},
                        {"alt_max", p("alt_max", 120.0)}}));
        } else {  // formation
          if (!has_tool("plan_drone_formation")) return give_up("formation planner unavailable");
          json positions = json::array();
          for (const auto& v : positions_) positions.push_back(json{{"x", v.x}, {"y", v.y}});
          step.tool_calls.push_back(
              call("plan_drone_formation",
                   json{{"shape", ps("shape", "star")},
                        {"center_x", p("center_x", 200.0)},
                        {"center_y", p("center_y", 150.0)},
                        {"orientation", p("orientation", 0.0)},
                        {"spacing", p("spacing", 5.0)},
                        {"n", static_cast<int>(active_.size())},
                        {"altitude", p("altitude", 10.0)},
                        {"positions", std::move(positions)},
                        {"objective", "maximize"}}));
        }
        break;
      }
      case Phase::arm: {
        for (const auto& id : active_) step.tool_calls.push_back(action(id, "arm"));
        break;
      }
      case Phase::takeoff: {
        for (std::size_t i = 0; i < active_.size(); ++i)
          step.tool_calls.push_back(
              action(active_[i], "takeoff", json{{"alt", layer_alt(i)}}));
        break;
      }
      case Phase::transit: {
        step = navigation_step(true);
        break;
      }
      case Phase::settle: {
        step = navigation_step(false);
        break;
      }
      case Phase::wait_takeoff:
      case Phase::wait_transit:
      case Phase::wait_settle: {
        step = wait_step("arrived");
        break;
      }
      case Phase::collect: {
        for (std::size_t i = 0; i < sensors_.size(); ++i)
          step.tool_calls.push_back(action(sensors_[i].id, "sample",
                                           json{{"requester_id", active_[i]}}));
        break;
      }
      case Phase::act: {
        step.tool_calls.push_back(action(actuator_, "trigger"));
        break;
      }
      case Phase::land:
      case Phase::abort_land: {
        for (const auto& id : active_) step.tool_calls.push_back(action(id, "land"));
        break;
      }
      case Phase::wait_land:
      case Phase::abort_wait: {
        step = wait_step("landed");
        break;
      }
      case Phase::abort_verify: {
        for (const auto& id : active_.empty() ? drones_ : active_)
          step.tool_calls.push_back(read(id, "armed"));
        break;
      }
      case Phase::verify: {
        for (const auto& id : active_) {
          step.tool_calls.push_back(read(id, "armed"));
          step.tool_calls.push_back(read(id, "mode"));
        }
        break;
      }
      case Phase::conclude: {
        step.final_text = conclusion();
        phase_ = Phase::done;
        break;
      }
      case Phase::abort_conclude: {
        step.final_text = "Mission aborted: " + failure_note_ +
                          ". All drones that flew were landed before stopping.";
        phase_ = Phase::done;
        break;
      }
      case Phase::done: {
        step.final_text = "Mission already concluded.";
        break;
      }
    }
    return step;
  }

  ReasonerStep navigation_step(bool layered) {
    ReasonerStep step;
    if (use_helpers()) {
      json commands = json::array();
      for (std::size_t i = 0; i < active_.size(); ++i)
        commands.push_back(json{{"thing", active_[i]},
                                {"x", targets_[i].first},
                                {"y", targets_[i].second},
                                {"alt", layered ? layer_alt(i) : settle_alt_}});
      step.tool_calls.push_back(
          call("send_drones_to_positions", json{{"commands", std::move(commands)}}));
    } else {
      for (std::size_t i = 0; i < active_.size(); ++i)
        step.tool_calls.push_back(action(active_[i], "goto",
                                         json{{"x", targets_[i].first},
                                              {"y", targets_[i].second},
                                              {"alt", layered ? layer_alt(i) : settle_alt_}}));
    }
    return step;
  }

  ReasonerStep wait_step(const std::string& kind) {
    ReasonerStep step;
    if (has_tool("wait_until_" + kind)) {
      step.tool_calls.push_back(call("wait_until_" + kind,
                                     json{{"things", active_}, {"timeout_s", 120.0}}));
    } else {
      for (const auto& id : active_) step.tool_calls.push_back(read(id, "action_status"));
    }
    return step;
  }

  ReasonerStep give_up(const std::string& why) {
    abort_with(why);
    return emit();  // verification reads, or the abort summary when no drone is known
  }

  std::string conclusion() const {
    std::ostringstream out;
    const auto n = active_.size();
    if (kind_ == "coverage_with_tool" || kind_ == "coverage_no_tool") {
      out << "Coverage complete: " << n << " drones each held an assigned vantage point at "
          << trimmed_number(settle_alt_)
          << " m; the fleet has landed and every drone reads disarmed.";
    } else if (kind_ == "formation") {
      out << "Star formation complete: " << n << " drones held their slots at "
          << trimmed_number(p("spacing", 5.0))
          << " m spacing; the fleet has landed and every drone reads disarmed.";
    } else {
      out << "Irrigation survey complete: readings";
      for (const auto& s : sensors_) out << " " << s.id << "=" << trimmed_number(readings_.at(s.id));
      out << "; mean humidity " << trimmed_number(humidity_mean_) << ", temperature "
          << trimmed_number(temperature_) << "; irrigation "
          << (required_ ? "was required and the actuator was triggered"
                        : "was not required and the actuator was left off")
          << "; all participating drones landed and read disarmed.";
    }
    return out.str();
  }

  std::string kind_;
  json params_;
  std::set<std::string> tool_names_;
  Phase phase_ = Phase::discover;
  bool started_ = false;
  bool armed_any_ = false;
  bool aborting_ = false;
  int seq_ = 0;

  std::vector<std::string> drones_;
  std::vector<std::string> active_;
  std::vector<SensorInfo> sensors_;
  std::string actuator_;
  std::vector<Point> positions_;
  std::vector<std::pair<double, double>> targets_;
  double settle_alt_ = 10.0;
  std::map<std::string, double> readings_;
  double humidity_mean_ = 0.0;
  double temperature_ = 0.0;
  bool required_ = false;
  std::string failure_note_;
};

}  // namespace

std::unique_ptr<Reasoner> make_scripted_reasoner(const std::string& mission_kind,
                                                 json mission_params) {
  return std::make_unique<ScriptedReasoner>(mission_kind, std::move(mission_params));
}

}  // namespace swarmloop::agent
