#pragma once

#include "swarmloop/sim/world.hpp"
#include "swarmloop/wot/servient.hpp"

namespace swarmloop::wot {

ThingDescription build_uav_td(const sim::World& world, const std::string& drone_id);
ThingDescription build_sensor_td(const sim::World& world, const std::string& device_id);
ThingDescription build_actuator_td(const sim::World& world, const std::string& device_id);
/// service is "planner-coverage" or "planner-formation".
ThingDescription build_service_td(const std::string& service);

/// Registers one Thing per drone and per ground device, with handlers bound
/// to the world. The world must outlive the servient.
void register_world_things(Servient& servient, sim::World& world);

/// Registers the two planner Service Things (pure computations).
void register_planner_things(Servient& servient);

}  // namespace swarmloop::wot
