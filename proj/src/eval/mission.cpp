#include "swarmloop/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace swarmloop::eval {

namespace {

sim::DeviceKind device_kind_from_string(const std::string& s) {
  if (s == "humidity_sensor") return sim::DeviceKind::humidity_sensor;
  if (s == "temperature_sensor") return sim::DeviceKind::temperature_sensor;
  if (s == "irrigation_actuator") return sim::DeviceKind::irrigation_actuator;
  throw DomainError("InvalidConfig", "unknown device kind: " + s);
}

json device_to_json(const sim::DeviceSpec& d) {
  return json{{"id", d.id},           {"kind", sim::to_string(d.kind)},
              {"x", d.x},             {"y", d.y},
              {"comm_range_m", d.comm_range_m}, {"value_seed", d.value_seed}};
}

sim::DeviceSpec device_from_json(const json& j) {
  sim::DeviceSpec d;
  d.id = j.at("id").get<std::string>();
  d.kind = device_kind_from_string(j.at("kind").get<std::string>());
  d.x = j.at("x").get<double>();
  d.y = j.at("y").get<double>();
  d.comm_range_m = j.value("comm_range_m", 30.0);
  d.value_seed = j.value("value_seed", std::int64_t{0});
  return d;
}

}  // namespace

std::string to_string(MissionKind k) {
  switch (k) {
    case MissionKind::coverage_with_tool: return "coverage_with_tool";
    case MissionKind::coverage_no_tool: return "coverage_no_tool";
    case MissionKind::formation: return "formation";
    case MissionKind::irrigation: return "irrigation";
  }
  throw DomainError("UnknownMission", "unhandled mission kind");
}

MissionKind mission_kind_from_string(const std::string& s) {
  if (s == "coverage_with_tool") return MissionKind::coverage_with_tool;
  if (s == "coverage_no_tool") return MissionKind::coverage_no_tool;
  if (s == "formation") return MissionKind::formation;
  if (s == "irrigation") return MissionKind::irrigation;
  throw DomainError("UnknownMission", "unknown mission kind: " + s);
}

void MissionSpec::normalize() {
  if (kind == MissionKind::coverage_no_tool) planner_tool = false;
}

void MissionSpec::validate() const {
  auto bad = [](const std::string& what) {
    throw DomainError("InvalidConfig", "mission spec: " + what);
  };
  if (n_drones < 1) bad("n_drones must be at least 1");
  if (region.width <= 0.0 || region.height <= 0.0) bad("region must have positive extent");
  if (kind == MissionKind::coverage_no_tool && planner_tool)
    bad("coverage_no_tool runs without the planner tool");
  if (kind != MissionKind::irrigation && !devices.empty())
    bad("ground devices belong to irrigation missions only");

  switch (kind) {
    case MissionKind::coverage_with_tool:
    case MissionKind::coverage_no_tool:
      if (fov_deg <= 0.0 || fov_deg >= 180.0) bad("fov_deg must lie in (0, 180)");
      if (alt_min_m <= 0.0 || alt_min_m > alt_max_m) bad("altitude bounds are inverted");
      break;
    case MissionKind::formation:
      if (formation_shape != "line" && formation_shape != "circle" && formation_shape != "star")
        bad("unknown formation shape: " + formation_shape);
      if (formation_spacing_m <= 0.0) bad("formation spacing must be positive");
      if (formation_altitude_m <= 0.0) bad("formation altitude must be positive");
      break;
    case MissionKind::irrigation: {
      int hum = 0, temp = 0, act = 0;
      for (const auto& d : devices) {
        switch (d.kind) {
          case sim::DeviceKind::humidity_sensor: ++hum; break;
          case sim::DeviceKind::temperature_sensor: ++temp; break;
          case sim::DeviceKind::irrigation_actuator: ++act; break;
        }
      }
      if (hum != 3 || temp != 1 || act != 1)
        throw DomainError("BadSensorLayout",
                          "irrigation needs exactly 3 humidity sensors, 1 temperature sensor, "
                          "and 1 actuator; got " +
                              std::to_string(hum) + "/" + std::to_string(temp) + "/" +
                              std::to_string(act));
      break;
    }
  }
}

std::vector<std::string> MissionSpec::drone_ids() const {
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(n_drones));
  for (int i = 1; i <= n_drones; ++i) ids.push_back("uav-" + std::to_string(i));
  return ids;
}

json MissionSpec::user_params() const {
  json p{{"n_drones", n_drones}};
  switch (kind) {
    case MissionKind::coverage_with_tool:
    case MissionKind::coverage_no_tool:
      p["origin_x"] = region.origin_x;
      p["origin_y"] = region.origin_y;
      p["width"] = region.width;
      p["height"] = region.height;
      p["fov_deg"] = fov_deg;
      p["alt_min"] = alt_min_m;
      p["alt_max"] = alt_max_m;
      break;
    case MissionKind::formation:
      p["shape"] = formation_shape;
      p["center_x"] = formation_center_x;
      p["center_y"] = formation_center_y;
      p["orientation"] = formation_orientation_rad;
      p["spacing"] = formation_spacing_m;
      p["altitude"] = formation_altitude_m;
      break;
    case MissionKind::irrigation:
      p["humidity_threshold"] = humidity_threshold_pct;
      p["temperature_threshold"] = temperature_threshold_c;
      break;
  }
  return p;
}

json MissionSpec::to_json() const {
  json j{{"kind", to_string(kind)},
         {"n_drones", n_drones},
         {"region",
          {{"origin_x", region.origin_x},
           {"origin_y", region.origin_y},
           {"width", region.width},
           {"height", region.height}}},
         {"fov_deg", fov_deg},
         {"alt_min_m", alt_min_m},
         {"alt_max_m", alt_max_m},
         {"formation",
          {{"shape", formation_shape},
           {"spacing_m", formation_spacing_m},
           {"center_x", formation_center_x},
           {"center_y", formation_center_y},
           {"orientation_rad", formation_orientation_rad},
           {"altitude_m", formation_altitude_m}}},
         {"thresholds",
          {{"humidity_pct", humidity_threshold_pct}, {"temperature_c", temperature_threshold_c}}},
         {"planner_tool", planner_tool},
         {"helper_tools", helper_tools},
         {"world_seed", world_seed}};
  json devs = json::array();
  for (const auto& d : devices) devs.push_back(device_to_json(d));
  j["devices"] = std::move(devs);
  return j;
}

MissionSpec MissionSpec::from_json(const json& j) {
  MissionSpec s = defaults(mission_kind_from_string(j.at("kind").get<std::string>()));
  s.n_drones = j.value("n_drones", s.n_drones);
  if (j.contains("region")) {
    const auto& r = j.at("region");
    s.region.origin_x = r.value("origin_x", s.region.origin_x);
    s.region.origin_y = r.value("origin_y", s.region.origin_y);
    s.region.width = r.value("width", s.region.width);
    s.region.height = r.value("height", s.region.height);
  }
  s.fov_deg = j.value("fov_deg", s.fov_deg);
  s.alt_min_m = j.value("alt_min_m", s.alt_min_m);
  s.alt_max_m = j.value("alt_max_m", s.alt_max_m);
  if (j.contains("formation")) {
    const auto& f = j.at("formation");
    s.formation_shape = f.value("shape", s.formation_shape);
    s.formation_spacing_m = f.value("spacing_m", s.formation_spacing_m);
    s.formation_center_x = f.value("center_x", s.formation_center_x);
    s.formation_center_y = f.value("center_y", s.formation_center_y);
    s.formation_orientation_rad = f.value("orientation_rad", s.formation_orientation_rad);
    s.formation_altitude_m = f.value("altitude_m", s.formation_altitude_m);
  }
  if (j.contains("thresholds")) {
    const auto& t = j.at("thresholds");
    s.humidity_threshold_pct = t.value("humidity_pct", s.humidity_threshold_pct);
    s.temperature_threshold_c = t.value("temperature_c", s.temperature_threshold_c);
  }
  if (j.contains("devices")) {
    s.devices.clear();
    for (const auto& d : j.at("devices")) s.devices.push_back(device_from_json(d));
  }
  s.planner_tool = j.value("planner_tool", s.planner_tool);
  s.helper_tools = j.value("helper_tools", s.helper_tools);
  s.world_seed = j.value("world_seed", s.world_seed);
  s.normalize();
  s.validate();
  return s;
}

MissionSpec MissionSpec::defaults(MissionKind kind) {
  MissionSpec s;
  s.kind = kind;
  if (kind == MissionKind::irrigation) {
    // Three humidity sensors on a west-east line, the temperature sensor and
    // the valve north of it; everything inside the default region and far
    // enough apart that one drone per device stays collision-free.
    s.devices = {
        {"hum-1", sim::DeviceKind::humidity_sensor, 60.0, 60.0, 30.0, 11},
        {"hum-2", sim::DeviceKind::humidity_sensor, 120.0, 60.0, 30.0, 12},
        {"hum-3", sim::DeviceKind::humidity_sensor, 180.0, 60.0, 30.0, 13},
        {"temp-1", sim::DeviceKind::temperature_sensor, 120.0, 120.0, 30.0, 14},
        {"valve-1", sim::DeviceKind::irrigation_actuator, 120.0, 90.0, 30.0, 15},
    };
  }
  s.normalize();
  return s;
}

std::string to_string(SuccessClass c) {
  switch (c) {
    case SuccessClass::full: return "full";
    case SuccessClass::early_exit: return "early_exit";
    case SuccessClass::fail: return "fail";
  }
  throw DomainError("InvalidConfig", "unhandled success class");
}

SuccessClass success_class_from_string(const std::string& s) {
  if (s == "full") return SuccessClass::full;
  if (s == "early_exit") return SuccessClass::early_exit;
  if (s == "fail") return SuccessClass::fail;
  throw DomainError("InvalidConfig", "unknown success class: " + s);
}

json SuccessVerdict::to_json() const {
  return json{{"class", to_string(cls)}, {"reasons", reasons}};
}

SuccessVerdict SuccessVerdict::from_json(const json& j) {
  SuccessVerdict v;
  v.cls = success_class_from_string(j.at("class").get<std::string>());
  for (const auto& r : j.value("reasons", json::array())) v.reasons.push_back(r.get<std::string>());
  return v;
}

json RunReport::to_json() const {
  json j{{"run_index", run_index},
         {"verdict", verdict.to_json()},
         {"exec_time_s", exec_time_s},
         {"energy_mah", energy_mah},
         {"collisions", collisions},
         {"tokens",
          {{"prompt", prompt_tokens}, {"completion", completion_tokens}, {"total", total_tokens}}},
         {"iterations", iterations},
         {"termination", termination}};
  if (!trace_file.empty()) j["trace_file"] = trace_file;
  if (error) j["error"] = *error;
  return j;
}

RunReport RunReport::from_json(const json& j) {
  RunReport r;
  r.run_index = j.value("run_index", 0);
  r.verdict = SuccessVerdict::from_json(j.at("verdict"));
  r.exec_time_s = j.at("exec_time_s").get<double>();
  r.energy_mah = j.at("energy_mah").get<double>();
  r.collisions = j.at("collisions").get<int>();
  const auto& t = j.at("tokens");
  r.prompt_tokens = t.at("prompt").get<std::int64_t>();
  r.completion_tokens = t.at("completion").get<std::int64_t>();
  r.total_tokens = t.at("total").get<std::int64_t>();
  r.iterations = j.at("iterations").get<int>();
  r.termination = j.value("termination", "");
  r.trace_file = j.value("trace_file", "");
  if (j.contains("error")) r.error = j.at("error").get<std::string>();
  return r;
}

json RunRecord::to_json() const {
  return json{{"mission", mission.to_json()}, {"reasoner", reasoner},
              {"reasoner_seed", reasoner_seed}, {"trace", trace.to_json()},
              {"world_init", world_init},      {"world_final", world_final}};
}

RunRecord RunRecord::from_json(const json& j) {
  RunRecord r;
  r.mission = MissionSpec::from_json(j.at("mission"));
  r.reasoner = j.at("reasoner").get<std::string>();
  r.reasoner_seed = j.at("reasoner_seed").get<std::uint64_t>();
  r.trace = agent::RunTrace::from_json(j.at("trace"));
  r.world_init = j.at("world_init");
  r.world_final = j.at("world_final");
  return r;
}

json MetricStats::to_json() const { return json{{"mean", mean}, {"stddev", stddev}}; }

namespace {

std::optional<MetricStats> stats_over(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return MetricStats{mean, std::sqrt(var)};
}

}  // namespace

void BatchReport::finalize() {
  full_count = early_exit_count = fail_count = 0;
  std::vector<double> times, energies, tokens;
  for (const auto& r : runs) {
    switch (r.verdict.cls) {
      case SuccessClass::full:
        ++full_count;
        times.push_back(r.exec_time_s);
        energies.push_back(r.energy_mah);
        tokens.push_back(static_cast<double>(r.total_tokens));
        break;
      case SuccessClass::early_exit: ++early_exit_count; break;
      case SuccessClass::fail: ++fail_count; break;
    }
  }
  success_rate = runs.empty() ? 0.0 : static_cast<double>(full_count) / runs.size();
  time_stats = stats_over(times);
  energy_stats = stats_over(energies);
  token_stats = stats_over(tokens);
}

std::string BatchReport::text_table() const {
  std::ostringstream out;
  out << "mission " << to_string(mission.kind) << "  reasoner " << reasoner << "  seed "
      << base_seed << "  runs " << runs.size() << "\n";
  out << std::left << std::setw(5) << "run" << std::setw(12) << "verdict" << std::right
      << std::setw(10) << "time_s" << std::setw(12) << "energy_mah" << std::setw(8) << "coll"
      << std::setw(10) << "tokens" << std::setw(7) << "iters"
      << "  reasons\n";
  for (const auto& r : runs) {
    out << std::left << std::setw(5) << r.run_index << std::setw(12)
        << to_string(r.verdict.cls) << std::right << std::fixed << std::setprecision(1)
        << std::setw(10) << r.exec_time_s << std::setw(12) << r.energy_mah << std::setw(8)
        << r.collisions << std::setw(10) << r.total_tokens << std::setw(7) << r.iterations
        << "  ";
    for (std::size_t i = 0; i < r.verdict.reasons.size(); ++i) {
      if (i) out << ",";
      out << r.verdict.reasons[i];
    }
    out << "\n";
  }
  out << std::setprecision(2) << "success_rate " << success_rate << " (" << full_count
      << " full, " << early_exit_count << " early-exit, " << fail_count << " fail)\n";
  if (time_stats) {
    out << std::setprecision(1) << "full-success means: time " << time_stats->mean << " +/- "
        << time_stats->stddev << " s, energy " << energy_stats->mean << " +/- "
        << energy_stats->stddev << " mAh, tokens " << std::setprecision(0) << token_stats->mean
        << " +/- " << token_stats->stddev << "\n";
  } else {
    out << "full-success means: n/a (no full successes)\n";
  }
  return out.str();
}

json BatchReport::to_json() const {
  json j{{"mission", mission.to_json()},
         {"reasoner", reasoner},
         {"base_seed", base_seed},
         {"n_runs", runs.size()},
         {"success_rate", success_rate},
         {"counts",
          {{"full", full_count}, {"early_exit", early_exit_count}, {"fail", fail_count}}}};
  json rr = json::array();
  for (const auto& r : runs) rr.push_back(r.to_json());
  j["runs"] = std::move(rr);
  j["aggregates"] = json{{"time_s", time_stats ? time_stats->to_json() : json()},
                         {"energy_mah", energy_stats ? energy_stats->to_json() : json()},
                         {"tokens", token_stats ? token_stats->to_json() : json()}};
  return j;
}

BatchReport BatchReport::from_json(const json& j) {
  BatchReport b;
  b.mission = MissionSpec::from_json(j.at("mission"));
  b.reasoner = j.at("reasoner").get<std::string>();
  b.base_seed = j.at("base_seed").get<std::uint64_t>();
  for (const auto& r : j.at("runs")) b.runs.push_back(RunReport::from_json(r));
  b.finalize();
  return b;
}

}  // namespace swarmloop::eval
