#include "swarmloop/sim/world.hpp"

#include <algorithm>
#include <cmath>

namespace swarmloop::sim {

namespace {

constexpr double kEps = 1e-12;

// Sampling windows for the synthetic sensor targets, centered on the
// irrigation thresholds (humidity 57 %, temperature 30 °C).
constexpr double kHumidityLo = 47.0, kHumidityHi = 67.0;
constexpr double kTemperatureLo = 25.0, kTemperatureHi = 35.0;

json vec_to_json(const Vec3& v) { return json{{"x", v.x}, {"y", v.y}, {"z", v.z}}; }

}  // namespace

std::string to_string(FlightMode mode) {
  switch (mode) {
    case FlightMode::GUIDED: return "GUIDED";
    case FlightMode::LAND: return "LAND";
    case FlightMode::RTL: return "RTL";
    case FlightMode::STABILIZE: return "STABILIZE";
  }
  return "STABILIZE";
}

FlightMode flight_mode_from_string(const std::string& s) {
  if (s == "GUIDED") return FlightMode::GUIDED;
  if (s == "LAND") return FlightMode::LAND;
  if (s == "RTL") return FlightMode::RTL;
  if (s == "STABILIZE") return FlightMode::STABILIZE;
  throw DomainError("InvalidMode", "unknown flight mode: " + s);
}

std::string to_string(DeviceKind kind) {
  switch (kind) {
    case DeviceKind::humidity_sensor: return "humidity_sensor";
    case DeviceKind::temperature_sensor: return "temperature_sensor";
    case DeviceKind::irrigation_actuator: return "irrigation_actuator";
  }
  return "humidity_sensor";
}

void WorldConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw DomainError("InvalidConfig", std::string(name) + " must be strictly positive");
  };
  positive(tick_dt, "tick_dt");
  if (tick_dt > 1.0) throw DomainError("InvalidConfig", "tick_dt must be in (0, 1]");
  positive(horiz_speed, "horiz_speed");
  positive(climb_speed, "climb_speed");
  positive(arrival_tol, "arrival_tol");
  positive(collision_horiz, "collision_horiz");
  positive(collision_vert, "collision_vert");
  positive(drain_ground_armed, "drain_ground_armed");
  positive(drain_hover, "drain_hover");
  positive(drain_cruise, "drain_cruise");
  positive(capacity_mah, "capacity_mah");
  positive(start_spacing_m, "start_spacing_m");
  positive(region.width, "region.width");
  positive(region.height, "region.height");
}

json WorldConfig::to_json() const {
  return json{{"tick_dt", tick_dt},
              {"horiz_speed", horiz_speed},
              {"climb_speed", climb_speed},
              {"arrival_tol", arrival_tol},
              {"collision_horiz", collision_horiz},
              {"collision_vert", collision_vert},
              {"drain_ground_armed", drain_ground_armed},
              {"drain_hover", drain_hover},
              {"drain_cruise", drain_cruise},
              {"capacity_mah", capacity_mah},
              {"start_spacing_m", start_spacing_m},
              {"region", {{"origin_x", region.origin_x},
                          {"origin_y", region.origin_y},
                          {"width", region.width},
                          {"height", region.height}}},
              {"rng_seed", rng_seed}};
}

WorldConfig WorldConfig::from_json(const json& j) {
  WorldConfig c;
  c.tick_dt = j.value("tick_dt", c.tick_dt);
  c.horiz_speed = j.value("horiz_speed", c.horiz_speed);
  c.climb_speed = j.value("climb_speed", c.climb_speed);
  c.arrival_tol = j.value("arrival_tol", c.arrival_tol);
  c.collision_horiz = j.value("collision_horiz", c.collision_horiz);
  c.collision_vert = j.value("collision_vert", c.collision_vert);
  c.drain_ground_armed = j.value("drain_ground_armed", c.drain_ground_armed);
  c.drain_hover = j.value("drain_hover", c.drain_hover);
  c.drain_cruise = j.value("drain_cruise", c.drain_cruise);
  c.capacity_mah = j.value("capacity_mah", c.capacity_mah);
  c.start_spacing_m = j.value("start_spacing_m", c.start_spacing_m);
  if (j.contains("region")) {
    const auto& r = j.at("region");
    c.region.origin_x = r.value("origin_x", 0.0);
    c.region.origin_y = r.value("origin_y", 0.0);
    c.region.width = r.value("width", c.region.width);
    c.region.height = r.value("height", c.region.height);
  }
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  c.validate();
  return c;
}

json CollisionEvent::to_json() const {
  return json{{"tick", tick}, {"drone_a", drone_a}, {"drone_b", drone_b}, {"separation_m", separation_m}};
}

World::World(WorldConfig config, int n_drones, std::vector<DeviceSpec> device_specs)
    : config_(std::move(config)) {
  config_.validate();
  if (n_drones < 1) throw DomainError("InvalidConfig", "world needs at least one drone");

  // Start layout: a start_spacing_m-pitch line along +x from the region origin.
  for (int i = 0; i < n_drones; ++i) {
    DroneState d;
    d.id = "uav-" + std::to_string(i + 1);
    d.sysid = i + 1;
    d.position = {config_.region.origin_x + config_.start_spacing_m * i, config_.region.origin_y, 0.0};
    d.home = d.position;
    d.battery_mah = config_.capacity_mah;
    d.capacity_mah = config_.capacity_mah;
    d.cruise_speed = config_.horiz_speed;
    drone_index_[d.id] = i;
    drones_.push_back(std::move(d));
  }

  for (const auto& spec : device_specs) {
    GroundDevice dev;
    dev.id = spec.id;
    dev.kind = spec.kind;
    dev.position = {spec.x, spec.y, 0.0};
    dev.comm_range_m = spec.comm_range_m;
    if (!(dev.comm_range_m > 0.0)) throw DomainError("InvalidConfig", "comm_range_m must be positive");
    dev.value_seed = spec.value_seed;
    device_index_[dev.id] = static_cast<int>(devices_.size());
    devices_.push_back(std::move(dev));
  }

  assign_sensor_values();

  json drones = json::array();
  for (const auto& d : drones_) {
    drones.push_back(json{{"id", d.id},
                          {"sysid", d.sysid},
                          {"position", vec_to_json(d.position)},
                          {"home", vec_to_json(d.home)},
                          {"battery_mah", d.battery_mah},
                          {"capacity_mah", d.capacity_mah}});
  }
  json devs = json::array();
  for (const auto& dev : devices_) {
    devs.push_back(json{{"id", dev.id},
                        {"kind", to_string(dev.kind)},
                        {"position", vec_to_json(dev.position)},
                        {"comm_range_m", dev.comm_range_m},
                        {"value_seed", dev.value_seed},
                        {"value", dev.value}});
  }
  init_snapshot_ = json{{"config", config_.to_json()}, {"drones", drones}, {"devices", devs}};
}

void World::assign_sensor_values() {
  // Decide first whether irrigation will be required, then sample the mean
  // targets consistently with that bit. Independent uniform draws over both
  // windows would make the condition hold in ~75% of runs instead of ~50%.
  Rng run_rng(mix_seed(config_.rng_seed, 0xA11CEULL));
  const bool required = run_rng.chance(0.5);
  double humidity_mean, temperature_mean;
  if (required) {
    switch (run_rng.uniform_int(0, 2)) {
      case 0:  // humidity branch only
        humidity_mean = run_rng.uniform(kHumidityLo, 57.0);
        temperature_mean = run_rng.uniform(kTemperatureLo, 30.0);
        break;
      case 1:  // temperature branch only
        humidity_mean = run_rng.uniform(std::nextafter(57.0, 100.0), kHumidityHi);
        temperature_mean = run_rng.uniform(30.0, kTemperatureHi);
        break;
      default:  // both branches
        humidity_mean = run_rng.uniform(kHumidityLo, 57.0);
        temperature_mean = run_rng.uniform(30.0, kTemperatureHi);
        break;
    }
  } else {
    humidity_mean = run_rng.uniform(std::nextafter(57.0, 100.0), kHumidityHi);
    temperature_mean = run_rng.uniform(kTemperatureLo, 30.0);
  }

  // Split the humidity mean across the humidity sensors with zero-sum offsets
  // derived from each sensor's value_seed, so per-device sequences stay
  // deterministic under (value_seed, run_seed).
  std::vector<int> humidity_idx;
  for (int i = 0; i < static_cast<int>(devices_.size()); ++i) {
    if (devices_[i].kind == DeviceKind::humidity_sensor) humidity_idx.push_back(i);
  }
  std::vector<double> offsets;
  double offset_sum = 0.0;
  for (int idx : humidity_idx) {
    Rng dev_rng(mix_seed(config_.rng_seed, static_cast<std::uint64_t>(devices_[idx].value_seed)));
    offsets.push_back(dev_rng.uniform(-5.0, 5.0));
    offset_sum += offsets.back();
  }
  const double offset_mean = humidity_idx.empty() ? 0.0 : offset_sum / humidity_idx.size();
  for (std::size_t k = 0; k < humidity_idx.size(); ++k) {
    double v = humidity_mean + offsets[k] - offset_mean;
    devices_[humidity_idx[k]].value = std::clamp(v, 0.0, 100.0);
  }
  for (auto& dev : devices_) {
    if (dev.kind == DeviceKind::temperature_sensor) dev.value = temperature_mean;
  }
}

DroneState& World::drone_ref(const std::string& id) {
  auto it = drone_index_.find(id);
  if (it == drone_index_.end()) throw DomainError("UnknownDrone", "no such drone: " + id);
  return drones_[it->second];
}

const DroneState& World::drone_ref(const std::string& id) const {
  auto it = drone_index_.find(id);
  if (it == drone_index_.end()) throw DomainError("UnknownDrone", "no such drone: " + id);
  return drones_[it->second];
}

GroundDevice& World::device_ref(const std::string& id) {
  auto it = device_index_.find(id);
  if (it == device_index_.end()) throw DomainError("UnknownDevice", "no such device: " + id);
  return devices_[it->second];
}

void World::log_command(const std::string& id, const std::string& command, json params) {
  commands_.push_back({ticks_, id, command, std::move(params)});
}

void World::cmd_arm(const std::string& id) {
  std::lock_guard lock(mu_);
  auto& d = drone_ref(id);
  d.armed = true;
  log_command(id, "arm", json::object());
}

void World::cmd_disarm(const std::string& id) {
  std::lock_guard lock(mu_);
  auto& d = drone_ref(id);
  if (d.airborne) throw DomainError("DisarmWhileAirborne", id + " is airborne; disarm refused");
  d.armed = false;
  d.target.reset();
  log_command(id, "disarm", json::object());
}

void World::cmd_takeoff(const std::string& id, double alt) {
  std::lock_guard lock(mu_);
  auto& d = drone_ref(id);
  if (!(alt > 0.0)) throw DomainError("NonPositiveAltitude", "takeoff requires alt > 0");
  if (!d.armed) throw DomainError("NotArmed", id + " is not armed");
  d.mode = FlightMode::GUIDED;  // GUIDED is set before the climb starts
  d.target = Vec3{d.position.x, d.position.y, alt};
  log_command(id, "takeoff", json{{"alt", alt}});
}

void World::cmd_goto(const std::string& id, double x, double y, double alt) {
  std::lock_guard lock(mu_);
  auto& d = drone_ref(id);
  if (!d.airborne) throw DomainError("NotAirborne", id + " is on the ground");
  if (d.mode != FlightMode::GUIDED) throw DomainError("InvalidMode", id + " is not in GUIDED mode");
  d.target = Vec3{x, y, alt};
  log_command(id, "goto", json{{"x", x}, {"y", y}, {"alt", alt}});
}

void World::cmd_land(const std::string& id) {
  std::lock_guard lock(mu_);
  auto& d = drone_ref(id);
  if (!d.airborne) throw DomainError("NotAirborne", id + " is on the ground");
  d.mode = FlightMode::LAND;
  d.target.reset();
  log_command(id, "land", json::object());
}

void World::cmd_rtl(const std::string& id) {
  std::lock_guard lock(mu_);
  auto& d = drone_ref(id);
  if (!d.airborne) throw DomainError("NotAirborne", id + " is on the ground");
  d.mode = FlightMode::RTL;
  d.target.reset();
  log_command(id, "rtl", json::object());
}

void World::set_mode(const std::string& id, const std::string& mode) {
  std::lock_guard lock(mu_);
  auto& d = drone_ref(id);
  d.mode = flight_mode_from_string(mode);
  log_command(id, "set_mode", json{{"mode", mode}});
}

void World::set_cruise_speed(const std::string& id, double speed) {
  std::lock_guard lock(mu_);
  auto& d = drone_ref(id);
  if (!(speed > 0.0)) throw DomainError("InvalidSpeed", "cruise speed must be strictly positive");
  d.cruise_speed = speed;
  log_command(id, "set_cruise_speed", json{{"speed", speed}});
}

Telemetry World::read_telemetry(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto& d = drone_ref(id);
  return Telemetry{d.position, d.mode, d.armed, d.battery_mah, d.airborne};
}

double World::sample_sensor(const std::string& device_id, const std::string& requester_id) {
  std::lock_guard lock(mu_);
  auto& dev = device_ref(device_id);
  if (dev.kind == DeviceKind::irrigation_actuator)
    throw DomainError("NotASensor", device_id + " is an actuator, not a sensor");
  const auto& requester = drone_ref(requester_id);
  const double dist = horizontal_distance(requester.position, dev.position);
  if (dist > dev.comm_range_m) {
    throw DomainError("OutOfRange", requester_id + " is " + std::to_string(dist) + " m from " +
                                        device_id + " (range " + std::to_string(dev.comm_range_m) + " m)");
  }
  dev.last_reading = dev.value;
  return dev.value;
}

void World::trigger_irrigation(const std::string& actuator_id) {
  std::lock_guard lock(mu_);
  auto& dev = device_ref(actuator_id);
  if (dev.kind != DeviceKind::irrigation_actuator)
    throw DomainError("NotAnActuator", actuator_id + " is not an irrigation actuator");
  dev.triggered = true;  // monotone: once true, stays true
  log_command(actuator_id, "trigger_irrigation", json::object());
}

void World::step_drone(DroneState& d) {
  const double dt = config_.tick_dt;
  const Vec3 before = d.position;

  // Requested cruise speed is capped by the platform maximum so the per-tick
  // displacement bound holds regardless of what the agent writes.
  const double hspeed = std::min(d.cruise_speed, config_.horiz_speed);

  if (d.armed) {
    switch (d.mode) {
      case FlightMode::GUIDED: {
        if (d.target) {
          const double dx = d.target->x - d.position.x;
          const double dy = d.target->y - d.position.y;
          const double hd = std::hypot(dx, dy);
          const double hstep = std::min(hd, hspeed * dt);
          if (hd > kEps) {
            d.position.x += dx / hd * hstep;
            d.position.y += dy / hd * hstep;
          }
          const double dz = d.target->z - d.position.z;
          const double vstep = std::min(std::abs(dz), config_.climb_speed * dt);
          d.position.z += (dz >= 0.0 ? vstep : -vstep);
        }
        break;
      }
      case FlightMode::LAND: {
        d.position.z = std::max(0.0, d.position.z - config_.climb_speed * dt);
        break;
      }
      case FlightMode::RTL: {
        const double dx = d.home.x - d.position.x;
        const double dy = d.home.y - d.position.y;
        const double hd = std::hypot(dx, dy);
        if (hd > config_.arrival_tol) {
          const double hstep = std::min(hd, hspeed * dt);
          d.position.x += dx / hd * hstep;
          d.position.y += dy / hd * hstep;
        } else {
          d.position.z = std::max(0.0, d.position.z - config_.climb_speed * dt);
        }
        break;
      }
      case FlightMode::STABILIZE:
        break;
    }
  }

  d.position.z = std::max(0.0, d.position.z);

  if (d.position.z > 0.0 && d.armed) {
    d.airborne = true;
    d.ever_airborne = true;
  }
  if (d.airborne && d.position.z <= 0.0 &&
      (d.mode == FlightMode::LAND || d.mode == FlightMode::RTL)) {
    d.airborne = false;
    d.armed = false;
    d.target.reset();
  }

  const bool moved = distance3(before, d.position) > kEps;
  double drain_rate = 0.0;
  if (d.armed) {
    if (!d.airborne && d.position.z <= 0.0 && !moved) {
      drain_rate = config_.drain_ground_armed;
    } else {
      drain_rate = moved ? config_.drain_cruise : config_.drain_hover;
    }
  }
  d.battery_mah = std::max(0.0, d.battery_mah - drain_rate * dt);
}

std::vector<CollisionEvent> World::tick() {
  std::lock_guard lock(mu_);
  ++ticks_;
  for (auto& d : drones_) step_drone(d);

  std::vector<CollisionEvent> fresh;
  std::vector<std::pair<int, int>> now_violating;
  for (int i = 0; i < static_cast<int>(drones_.size()); ++i) {
    for (int j = i + 1; j < static_cast<int>(drones_.size()); ++j) {
      const auto& a = drones_[i];
      const auto& b = drones_[j];
      if (!a.airborne || !b.airborne) continue;
      const double hsep = horizontal_distance(a.position, b.position);
      const double vsep = std::abs(a.position.z - b.position.z);
      if (hsep < config_.collision_horiz && vsep < config_.collision_vert) {
        now_violating.emplace_back(i, j);
        const bool ongoing = std::find(active_violations_.begin(), active_violations_.end(),
                                       std::make_pair(i, j)) != active_violations_.end();
        if (!ongoing) {
          CollisionEvent ev;
          ev.tick = ticks_;
          ev.drone_a = std::min(a.id, b.id);
          ev.drone_b = std::max(a.id, b.id);
          ev.separation_m = hsep;
          collisions_.push_back(ev);
          fresh.push_back(ev);
        }
      }
    }
  }
  active_violations_ = std::move(now_violating);

  for (int i = 0; i < static_cast<int>(drones_.size()); ++i) {
    const auto& d = drones_[i];
    history_.push_back({ticks_, i, d.position, d.armed, d.airborne, d.mode});
  }
  return fresh;
}

void World::advance(double seconds) {
  if (seconds <= 0.0) return;
  auto n = static_cast<std::int64_t>(std::llround(seconds / config_.tick_dt));
  if (n < 1) n = 1;
  for (std::int64_t i = 0; i < n; ++i) tick();
}

double World::energy_consumed() const {
  std::lock_guard lock(mu_);
  double total = 0.0;
  for (const auto& d : drones_) total += d.capacity_mah - d.battery_mah;
  return total;
}

double World::sim_time() const {
  std::lock_guard lock(mu_);
  return static_cast<double>(ticks_) * config_.tick_dt;
}

std::int64_t World::tick_count() const {
  std::lock_guard lock(mu_);
  return ticks_;
}

std::vector<DroneState> World::drones() const {
  std::lock_guard lock(mu_);
  return drones_;
}

std::vector<GroundDevice> World::devices() const {
  std::lock_guard lock(mu_);
  return devices_;
}

DroneState World::drone(const std::string& id) const {
  std::lock_guard lock(mu_);
  return drone_ref(id);
}

GroundDevice World::device(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = device_index_.find(id);
  if (it == device_index_.end()) throw DomainError("UnknownDevice", "no such device: " + id);
  return devices_[it->second];
}

std::vector<std::string> World::drone_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& d : drones_) ids.push_back(d.id);
  return ids;
}

std::vector<std::string> World::device_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& d : devices_) ids.push_back(d.id);
  return ids;
}

std::vector<CollisionEvent> World::collisions() const {
  std::lock_guard lock(mu_);
  return collisions_;
}

std::vector<CommandRecord> World::command_log() const {
  std::lock_guard lock(mu_);
  return commands_;
}

json World::init_snapshot() const {
  std::lock_guard lock(mu_);
  return init_snapshot_;
}

json World::final_snapshot() const {
  std::lock_guard lock(mu_);
  json drones = json::array();
  for (const auto& d : drones_) {
    drones.push_back(json{{"id", d.id},
                          {"sysid", d.sysid},
                          {"position", vec_to_json(d.position)},
                          {"home", vec_to_json(d.home)},
                          {"mode", to_string(d.mode)},
                          {"armed", d.armed},
                          {"airborne", d.airborne},
                          {"ever_airborne", d.ever_airborne},
                          {"battery_mah", d.battery_mah},
                          {"capacity_mah", d.capacity_mah}});
  }
  json devs = json::array();
  for (const auto& dev : devices_) {
    json e{{"id", dev.id},
           {"kind", to_string(dev.kind)},
           {"position", vec_to_json(dev.position)},
           {"comm_range_m", dev.comm_range_m},
           {"triggered", dev.triggered}};
    if (dev.last_reading) e["last_reading"] = *dev.last_reading;
    devs.push_back(std::move(e));
  }
  json cols = json::array();
  for (const auto& c : collisions_) cols.push_back(c.to_json());
  json cmds = json::array();
  for (const auto& c : commands_) {
    cmds.push_back(json{{"tick", c.tick}, {"drone", c.drone_id}, {"command", c.command}, {"params", c.params}});
  }
  json hist = json::array();
  for (const auto& h : history_) {
    hist.push_back(json::array({h.tick, h.drone_index, h.position.x, h.position.y, h.position.z,
                                h.armed, h.airborne, to_string(h.mode)}));
  }
  return json{{"tick_count", ticks_},
              {"sim_time_s", static_cast<double>(ticks_) * config_.tick_dt},
              {"drones", drones},
              {"devices", devs},
              {"collisions", cols},
              {"commands", cmds},
              {"history", hist}};
}

void World::write_telemetry_jsonl(std::ostream& out) const {
  std::lock_guard lock(mu_);
  for (const auto& h : history_) {
    json line{{"tick", h.tick},
              {"drone", drones_[h.drone_index].id},
              {"x", h.position.x},
              {"y", h.position.y},
              {"z", h.position.z},
              {"armed", h.armed},
              {"airborne", h.airborne},
              {"mode", to_string(h.mode)}};
    out << line.dump() << "\n";
  }
}

void World::write_collisions_jsonl(std::ostream& out) const {
  std::lock_guard lock(mu_);
  for (const auto& c : collisions_) out << c.to_json().dump() << "\n";
}

}  // namespace swarmloop::sim
