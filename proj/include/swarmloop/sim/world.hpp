#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "swarmloop/common.hpp"

namespace swarmloop::sim {

enum class FlightMode { GUIDED, LAND, RTL, STABILIZE };

std::string to_string(FlightMode mode);
FlightMode flight_mode_from_string(const std::string& s);  // throws InvalidMode

enum class DeviceKind { humidity_sensor, temperature_sensor, irrigation_actuator };

std::string to_string(DeviceKind kind);

struct DroneState {
  std::string id;
  int sysid = 0;
  Vec3 position;  // local ENU, z = altitude AGL
  Vec3 home;
  FlightMode mode = FlightMode::STABILIZE;
  bool armed = false;
  bool airborne = false;
  double battery_mah = 0.0;
  double capacity_mah = 0.0;
  std::optional<Vec3> target;
  double cruise_speed = 0.0;   // horizontal m/s, writable via the WoT layer
  bool ever_airborne = false;  // participation flag for scoring
};

struct GroundDevice {
  std::string id;
  DeviceKind kind = DeviceKind::humidity_sensor;
  Vec3 position;
  double comm_range_m = 0.0;
  std::int64_t value_seed = 0;
  std::optional<double> last_reading;
  bool triggered = false;  // actuators only; monotone within a run
  double value = 0.0;      // reading assigned at world init, fixed for the run
};

struct Rect {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double width = 0.0;
  double height = 0.0;

  bool contains(double x, double y) const {
    return x > origin_x && x < origin_x + width && y > origin_y && y < origin_y + height;
  }
};

struct WorldConfig {
  double tick_dt = 0.5;           // seconds, must be in (0, 1]
  double horiz_speed = 10.0;      // m/s
  double climb_speed = 2.5;       // m/s
  double arrival_tol = 1.0;       // meters
  double collision_horiz = 2.0;   // meters
  double collision_vert = 1.0;    // meters
  double drain_ground_armed = 0.2;  // mAh/s
  double drain_hover = 1.0;
  double drain_cruise = 1.5;
  double capacity_mah = 5000.0;
  double start_spacing_m = 5.0;  // pitch of the initial line of drones
  Rect region{0.0, 0.0, 400.0, 300.0};
  std::uint64_t rng_seed = 0;

  void validate() const;  // throws InvalidConfig
  json to_json() const;
  static WorldConfig from_json(const json& j);
};

struct CollisionEvent {
  std::int64_t tick = 0;
  std::string drone_a;  // lexicographically first of the pair
  std::string drone_b;
  double separation_m = 0.0;  // horizontal separation at episode start

  json to_json() const;
};

struct DeviceSpec {
  std::string id;
  DeviceKind kind;
  double x = 0.0;
  double y = 0.0;
  double comm_range_m = 30.0;
  std::int64_t value_seed = 0;
};

struct Telemetry {
  Vec3 position;
  FlightMode mode;
  bool armed;
  double battery_mah;
  bool airborne;
};

struct CommandRecord {
  std::int64_t tick = 0;
  std::string drone_id;
  std::string command;
  json params;
};

struct HistoryRecord {
  std::int64_t tick = 0;
  int drone_index = 0;
  Vec3 position;
  bool armed = false;
  bool airborne = false;
  FlightMode mode = FlightMode::STABILIZE;
};

/// Deterministic discrete-time substitute for a SITL fleet: point-mass
/// kinematics at constant speeds, piecewise-linear battery drain, range-gated
/// ground devices, and episode-deduplicated collision detection.
///
/// All mutation is serialized through one internal mutex; readers get
/// value-type snapshots.
class World {
public:
  World(WorldConfig config, int n_drones, std::vector<DeviceSpec> devices = {});

  // --- commands (throw DomainError with the codes named in the docs) ---
  void cmd_arm(const std::string& id);
  void cmd_disarm(const std::string& id);
  void cmd_takeoff(const std::string& id, double alt);
  void cmd_goto(const std::string& id, double x, double y, double alt);
  void cmd_land(const std::string& id);
  void cmd_rtl(const std::string& id);
  void set_mode(const std::string& id, const std::string& mode);
  void set_cruise_speed(const std::string& id, double speed);

  Telemetry read_telemetry(const std::string& id) const;
  double sample_sensor(const std::string& device_id, const std::string& requester_id);
  void trigger_irrigation(const std::string& actuator_id);

  /// Advances one tick; returns collision episodes that began this tick.
  std::vector<CollisionEvent> tick();
  /// Advances by the closest whole number of ticks covering `seconds`.
  void advance(double seconds);

  double energy_consumed() const;
  double sim_time() const;
  std::int64_t tick_count() const;

  std::vector<DroneState> drones() const;
  std::vector<GroundDevice> devices() const;
  DroneState drone(const std::string& id) const;
  GroundDevice device(const std::string& id) const;
  std::vector<std::string> drone_ids() const;
  std::vector<std::string> device_ids() const;
  const WorldConfig& config() const { return config_; }

  std::vector<CollisionEvent> collisions() const;
  std::vector<CommandRecord> command_log() const;
  const std::vector<HistoryRecord>& history() const { return history_; }

  json init_snapshot() const;   // config + initial states, reasoner-independent
  json final_snapshot() const;  // drones, devices, collisions, commands, history
  void write_telemetry_jsonl(std::ostream& out) const;
  void write_collisions_jsonl(std::ostream& out) const;

private:
  DroneState& drone_ref(const std::string& id);
  const DroneState& drone_ref(const std::string& id) const;
  GroundDevice& device_ref(const std::string& id);
  void step_drone(DroneState& d);
  void log_command(const std::string& id, const std::string& command, json params);
  void assign_sensor_values();

  WorldConfig config_;
  std::vector<DroneState> drones_;
  std::vector<GroundDevice> devices_;
  std::map<std::string, int> drone_index_;
  std::map<std::string, int> device_index_;
  std::int64_t ticks_ = 0;
  std::vector<CollisionEvent> collisions_;
  std::vector<std::pair<int, int>> active_violations_;
  std::vector<CommandRecord> commands_;
  std::vector<HistoryRecord> history_;
  json init_snapshot_;
  mutable std::mutex mu_;
};

}  // namespace swarmloop::sim
