#include <algorithm>
#include <cmath>
#include <optional>

#include "swarmloop/eval/eval.hpp"
#include "swarmloop/plan/planners.hpp"

namespace swarmloop::eval {

namespace {

struct DroneEnd {
  std::string id;
  Vec3 position;
  std::string mode;
  bool armed = false;
  bool airborne = false;
  bool ever_airborne = false;
};

std::vector<DroneEnd> fleet_end_state(const json& final_world) {
  std::vector<DroneEnd> out;
  for (const auto& d : final_world.at("drones")) {
    DroneEnd e;
    e.id = d.at("id").get<std::string>();
    e.position = {d.at("position").at("x").get<double>(), d.at("position").at("y").get<double>(),
                  d.at("position").at("z").get<double>()};
    e.mode = d.at("mode").get<std::string>();
    e.armed = d.at("armed").get<bool>();
    e.airborne = d.at("airborne").get<bool>();
    e.ever_airborne = d.at("ever_airborne").get<bool>();
    out.push_back(std::move(e));
  }
  return out;
}

bool landing_mode(const std::string& mode) { return mode == "LAND" || mode == "RTL"; }

/// Appends not_landed / not_disarmed for participating drones that are still
/// flying or armed; returns true when every participating drone satisfies
/// both completion constraints.
bool termination_constraints(const std::vector<DroneEnd>& fleet,
                             std::vector<std::string>& reasons) {
  bool landed = true, disarmed = true;
  for (const auto& d : fleet) {
    if (!d.ever_airborne) continue;
    if (!landing_mode(d.mode) || d.airborne) landed = false;
    if (d.armed) disarmed = false;
  }
  if (!landed) reasons.push_back("not_landed");
  if (!disarmed) reasons.push_back("not_disarmed");
  return landed && disarmed;
}

/// History rows are [tick, drone_index, x, y, z, armed, airborne, mode];
/// a command logged at tick T was issued with the fleet in the tick-T rows.
std::optional<std::int64_t> first_landing_command_tick(const json& final_world) {
  std::optional<std::int64_t> first;
  for (const auto& c : final_world.at("commands")) {
    const std::string cmd = c.at("command").get<std::string>();
    bool landing = cmd == "land" || cmd == "rtl";
    if (cmd == "set_mode") landing = landing_mode(c.at("params").value("mode", ""));
    if (!landing) continue;
    const auto t = c.at("tick").get<std::int64_t>();
    if (!first || t < *first) first = t;
  }
  return first;
}

std::vector<Vec3> positions_at_tick(const json& final_world, std::int64_t tick,
                                    const std::vector<DroneEnd>& fleet,
                                    bool participating_only) {
  std::vector<Vec3> out;
  for (const auto& row : final_world.at("history")) {
    if (row.at(0).get<std::int64_t>() != tick) continue;
    const auto idx = row.at(1).get<std::size_t>();
    if (participating_only && !fleet.at(idx).ever_airborne) continue;
    out.push_back({row.at(2).get<double>(), row.at(3).get<double>(), row.at(4).get<double>()});
  }
  return out;
}

SuccessVerdict verdict_of(bool objective_met, bool constraints_met, bool allow_early_exit,
                          std::vector<std::string> objective_reasons,
                          std::vector<std::string> constraint_reasons,
                          std::vector<std::string> hard_fail_reasons) {
  SuccessVerdict v;
  if (!hard_fail_reasons.empty() || !objective_met) {
    v.cls = SuccessClass::fail;
    v.reasons = std::move(objective_reasons);
    for (auto& r : constraint_reasons) v.reasons.push_back(std::move(r));
    for (auto& r : hard_fail_reasons) v.reasons.push_back(std::move(r));
    return v;
  }
  if (!constraints_met) {
    v.cls = allow_early_exit ? SuccessClass::early_exit : SuccessClass::fail;
    v.reasons = std::move(constraint_reasons);
    return v;
  }
  v.cls = SuccessClass::full;
  return v;
}

}  // namespace

SuccessVerdict score_coverage_with_tool(const agent::RunTrace& trace, const json& final_world,
                                        const json& plan_doc, SlotTolerance tol) {
  (void)trace;
  if (!plan_doc.is_object() || !plan_doc.contains("slots"))
    throw DomainError("MissingPlan", "no coverage plan recorded for the run");
  plan::CoveragePlan plan;
  try {
    plan = plan::CoveragePlan::from_json(plan_doc);
  } catch (const json::exception&) {
    throw DomainError("MissingPlan", "recorded plan is not a coverage plan document");
  }
  if (plan.slots.empty()) throw DomainError("MissingPlan", "recorded coverage plan has no slots");

  std::vector<bool> reached(plan.slots.size(), false);
  std::size_t remaining = plan.slots.size();
  for (const auto& row : final_world.at("history")) {
    const double x = row.at(2).get<double>();
    const double y = row.at(3).get<double>();
    const double z = row.at(4).get<double>();
    for (std::size_t s = 0; s < plan.slots.size() && remaining > 0; ++s) {
      if (reached[s]) continue;
      const auto& slot = plan.slots[s];
      if (std::hypot(x - slot.x, y - slot.y) <= tol.horiz_m &&
          std::abs(z - slot.alt) <= tol.vert_m) {
        reached[s] = true;
        --remaining;
      }
    }
    if (remaining == 0) break;
  }

  const auto fleet = fleet_end_state(final_world);
  std::vector<std::string> objective, constraints, hard;
  if (remaining > 0) objective.push_back("slots_unreached");
  const bool constraints_met = termination_constraints(fleet, constraints);
  if (count_collisions(final_world) > 0) hard.push_back("collision");
  return verdict_of(remaining == 0, constraints_met, true, std::move(objective),
                    std::move(constraints), std::move(hard));
}

SuccessVerdict score_coverage_no_tool(const agent::RunTrace& trace, const json& final_world,
                                      const sim::Rect& region) {
  (void)trace;
  const auto fleet = fleet_end_state(final_world);
  bool any_flew = false, any_landed = false, any_inside = false;
  for (const auto& d : fleet) {
    if (!d.ever_airborne) continue;
    any_flew = true;
    if (d.airborne) continue;
    any_landed = true;
    if (region.contains(d.position.x, d.position.y)) any_inside = true;
  }

  SuccessVerdict v;
  if (count_collisions(final_world) > 0) v.reasons.push_back("collision");
  if (!any_flew)
    v.reasons.push_back("no_takeoff");
  else if (!any_landed)
    v.reasons.push_back("not_landed");
  else if (!any_inside)
    v.reasons.push_back("outside_region");
  v.cls = v.reasons.empty() ? SuccessClass::full : SuccessClass::fail;
  return v;
}

SuccessVerdict score_formation(const agent::RunTrace& trace, const json& final_world,
                               const json& plan_doc, double tol) {
  (void)trace;
  if (!plan_doc.is_object() || !plan_doc.contains("shape"))
    throw DomainError("MissingPlan", "no formation plan recorded for the run");
  plan::FormationPlan plan;
  try {
    plan = plan::FormationPlan::from_json(plan_doc);
  } catch (const json::exception&) {
    throw DomainError("MissingPlan", "recorded plan is not a formation plan document");
  }

  const auto fleet = fleet_end_state(final_world);

  // Formation-complete instant: the fleet state in which the first land/RTL
  // was issued; with no landing command, the final tick (still hovering).
  std::int64_t instant = final_world.at("tick_count").get<std::int64_t>();
  if (const auto t = first_landing_command_tick(final_world)) instant = *t;

  bool star = false;
  if (plan.shape == "star" && instant > 0) {
    const auto positions = positions_at_tick(final_world, instant, fleet, true);
    if (positions.size() == plan.slots.size())
      star = plan::detect_star(positions, plan, tol);
  }

  std::vector<std::string> objective, constraints, hard;
  if (!star) objective.push_back("no_star");
  const bool constraints_met = termination_constraints(fleet, constraints);
  if (count_collisions(final_world) > 0) hard.push_back("collision");
  return verdict_of(star, constraints_met, true, std::move(objective), std::move(constraints),
                    std::move(hard));
}

SuccessVerdict score_irrigation(const agent::RunTrace& trace, const json& final_world,
                                const MissionSpec& spec) {
  (void)trace;
  std::vector<double> humidity;
  std::optional<double> temperature;
  std::optional<bool> triggered;
  int hum_sensors = 0, temp_sensors = 0, actuators = 0;
  for (const auto& d : final_world.at("devices")) {
    const std::string kind = d.at("kind").get<std::string>();
    if (kind == "irrigation_actuator") {
      ++actuators;
      triggered = d.at("triggered").get<bool>();
    } else if (kind == "humidity_sensor") {
      ++hum_sensors;
      if (d.contains("last_reading")) humidity.push_back(d.at("last_reading").get<double>());
    } else if (kind == "temperature_sensor") {
      ++temp_sensors;
      if (d.contains("last_reading")) temperature = d.at("last_reading").get<double>();
    }
  }
  if (hum_sensors != 3 || temp_sensors != 1 || actuators != 1)
    throw DomainError("BadSensorLayout",
                      "irrigation scoring expects 3 humidity sensors, 1 temperature sensor, "
                      "and 1 actuator");

  const bool readings_complete = humidity.size() == 3 && temperature.has_value();
  bool decision_correct = false;
  std::vector<std::string> objective;
  if (!readings_complete) {
    objective.push_back("missing_readings");
  } else {
    const double humidity_mean = (humidity[0] + humidity[1] + humidity[2]) / 3.0;
    const bool required = humidity_mean <= spec.humidity_threshold_pct ||
                          *temperature >= spec.temperature_threshold_c;
    decision_correct = *triggered == required;
    if (*triggered && !required) objective.push_back("false_positive");
    if (!*triggered && required) objective.push_back("false_negative");
  }

  const auto fleet = fleet_end_state(final_world);
  std::vector<std::string> constraints;
  const bool constraints_met = termination_constraints(fleet, constraints);
  return verdict_of(readings_complete && decision_correct, constraints_met, true,
                    std::move(objective), std::move(constraints), {});
}

SuccessVerdict score_run(const MissionSpec& spec, const agent::RunTrace& trace,
                         const json& final_world) {
  switch (spec.kind) {
    case MissionKind::coverage_with_tool:
      return score_coverage_with_tool(trace, final_world, trace.plan);
    case MissionKind::coverage_no_tool:
      return score_coverage_no_tool(trace, final_world, spec.region);
    case MissionKind::formation:
      return score_formation(trace, final_world, trace.plan);
    case MissionKind::irrigation:
      return score_irrigation(trace, final_world, spec);
  }
  throw DomainError("UnknownMission", "unhandled mission kind in scoring");
}

int count_collisions(const json& final_world) {
  return static_cast<int>(final_world.at("collisions").size());
}

double measure_exec_time(const agent::RunTrace& trace, const json& final_world) {
  const auto& commands = final_world.at("commands");
  if (commands.empty()) return 0.0;
  std::int64_t first = commands.front().at("tick").get<std::int64_t>();
  for (const auto& c : commands) first = std::min(first, c.at("tick").get<std::int64_t>());
  const auto ticks = final_world.at("tick_count").get<std::int64_t>();
  const double sim_time = final_world.at("sim_time_s").get<double>();
  const double tick_dt = ticks > 0 ? sim_time / static_cast<double>(ticks) : 0.0;
  return trace.sim_time_end - static_cast<double>(first) * tick_dt;
}

double measure_energy(const json& final_world) {
  double total = 0.0;
  for (const auto& d : final_world.at("drones"))
    total += d.at("capacity_mah").get<double>() - d.at("battery_mah").get<double>();
  return total;
}

}  // namespace swarmloop::eval
