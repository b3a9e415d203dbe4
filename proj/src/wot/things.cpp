#include "swarmloop/wot/things.hpp"

#include "swarmloop/plan/planners.hpp"

namespace swarmloop::wot {

namespace {

FieldSpec field(FieldType type, bool required = true) {
  FieldSpec s;
  s.type = type;
  s.required = required;
  return s;
}

FieldSpec positive_number(bool required = true) {
  auto s = field(FieldType::number, required);
  s.exclusive_minimum = 0.0;
  return s;
}

FieldSpec object_array(bool required = true) {
  auto s = field(FieldType::array, required);
  s.item_type = FieldType::object;
  return s;
}

Schema ack_schema() {
  Schema s;
  s.fields["ok"] = field(FieldType::boolean);
  return s;
}

ActionAffordance simple_action(const std::string& description) {
  ActionAffordance a;
  a.output = ack_schema();
  a.description = description;
  return a;
}

PropertyAffordance ro_property(FieldType type, const std::string& description) {
  PropertyAffordance p;
  p.value = field(type);
  p.read_only = true;
  p.description = description;
  return p;
}

void add_action_status(ThingDescription& td) {
  td.properties["action_status"] =
      ro_property(FieldType::object, "state of the most recent action invocation");
}

void bind_idle_status(Servient& servient, const std::string& thing_id) {
  servient.bind_property(thing_id, "action_status",
                         [] { return json{{"state", "idle"}}; });
}

json vec_json(const Vec3& v) { return json{{"x", v.x}, {"y", v.y}, {"z", v.z}}; }

plan::Region region_from_input(const json& in) {
  return {in.value("origin_x", 0.0), in.value("origin_y", 0.0), in.at("width").get<double>(),
          in.at("height").get<double>()};
}

json run_coverage_planner(const json& in) {
  const auto plan = plan::plan_area_coverage(
      region_from_input(in), in.at("n").get<int>(), deg_to_rad(in.at("fov_deg").get<double>()),
      in.at("alt_min").get<double>(), in.at("alt_max").get<double>());
  return plan.to_json();
}

json run_formation_planner(const json& in) {
  const auto plan = plan::plan_drone_formation(
      in.at("shape").get<std::string>(), in.at("center_x").get<double>(),
      in.at("center_y").get<double>(), in.value("orientation", 0.0),
      in.at("spacing").get<double>(), in.at("n").get<int>(), in.at("altitude").get<double>());
  json out = plan.to_json();
  if (in.contains("positions")) {
    std::vector<Vec3> positions;
    for (std::size_t i = 0; i < in.at("positions").size(); ++i) {
      const auto& p = in.at("positions")[i];
      const std::string path = "positions[" + std::to_string(i) + "]";
      if (!p.contains("x") || !p.at("x").is_number() || !p.contains("y") ||
          !p.at("y").is_number())
        throw schema_violation(path, "expected an object with numeric x and y");
      positions.push_back({p.at("x").get<double>(), p.at("y").get<double>(), p.value("z", 0.0)});
    }
    const auto assignment =
        plan::assign_slots(positions, plan.slots, in.value("objective", "maximize"));
    out["assignment"] = assignment.to_json();
  }
  return out;
}

}  // namespace

ThingDescription build_uav_td(const sim::World& world, const std::string& drone_id) {
  world.drone(drone_id);  // throws UnknownDrone

  ThingDescription td;
  td.id = drone_id;
  td.title = "UAV " + drone_id;
  td.thing_class = ThingClass::physical;

  td.properties["position"] = ro_property(FieldType::object, "local ENU position in meters");
  td.properties["mode"] = ro_property(FieldType::string, "flight mode");
  td.properties["armed"] = ro_property(FieldType::boolean, "motor-enable state");
  td.properties["battery"] = ro_property(FieldType::number, "remaining battery in mAh");
  td.properties["battery"].value.minimum = 0.0;
  td.properties["airborne"] = ro_property(FieldType::boolean, "true once off the ground");
  PropertyAffordance cruise;
  cruise.value = positive_number();
  cruise.read_only = false;
  cruise.description = "requested horizontal speed in m/s, capped by the platform";
  td.properties["cruise_speed"] = cruise;
  add_action_status(td);

  td.actions["arm"] = simple_action("enable motors");
  td.actions["disarm"] = simple_action("disable motors; refused while airborne");

  ActionAffordance takeoff = simple_action("climb straight up to alt");
  takeoff.input.fields["alt"] = positive_number();
  td.actions["takeoff"] = takeoff;

  ActionAffordance go = simple_action("fly to (x, y, alt) in GUIDED mode");
  go.input.fields["x"] = field(FieldType::number);
  go.input.fields["y"] = field(FieldType::number);
  go.input.fields["alt"] = positive_number();
  td.actions["goto"] = go;

  td.actions["land"] = simple_action("descend and disarm in place");
  td.actions["rtl"] = simple_action("return to home, then land and disarm");

  ActionAffordance set_mode = simple_action("switch flight mode");
  set_mode.input.fields["mode"] = field(FieldType::string);
  td.actions["set_mode"] = set_mode;

  td.rebuild_forms();
  return td;
}

ThingDescription build_sensor_td(const sim::World& world, const std::string& device_id) {
  const auto dev = world.device(device_id);  // throws UnknownDevice
  if (dev.kind == sim::DeviceKind::irrigation_actuator)
    throw DomainError("NotASensor", device_id + " is an actuator, not a sensor");

  ThingDescription td;
  td.id = device_id;
  td.title = (dev.kind == sim::DeviceKind::humidity_sensor ? "Humidity sensor "
                                                           : "Temperature sensor ") +
             device_id;
  td.thing_class = ThingClass::physical;

  td.properties["position"] = ro_property(FieldType::object, "ground position in meters");
  td.properties["comm_range"] = ro_property(FieldType::number, "communication range in meters");
  td.properties["comm_range"].value.exclusive_minimum = 0.0;
  add_action_status(td);

  ActionAffordance sample;
  sample.description = "take a reading; the requesting drone must be in range";
  sample.input.fields["requester_id"] = field(FieldType::string);
  sample.output.fields["value"] = field(FieldType::number);
  td.actions["sample"] = sample;

  td.rebuild_forms();
  return td;
}

ThingDescription build_actuator_td(const sim::World& world, const std::string& device_id) {
  const auto dev = world.device(device_id);  // throws UnknownDevice
  if (dev.kind != sim::DeviceKind::irrigation_actuator)
    throw DomainError("NotAnActuator", device_id + " is not an irrigation actuator");

  ThingDescription td;
  td.id = device_id;
  td.title = "Irrigation actuator " + device_id;
  td.thing_class = ThingClass::physical;

  td.properties["position"] = ro_property(FieldType::object, "ground position in meters");
  td.properties["comm_range"] = ro_property(FieldType::number, "communication range in meters");
  td.properties["triggered"] = ro_property(FieldType::boolean, "true once irrigation started");
  add_action_status(td);

  td.actions["trigger"] = simple_action("start irrigation; idempotent");

  td.rebuild_forms();
  return td;
}

ThingDescription build_service_td(const std::string& service) {
  ThingDescription td;
  td.id = service;
  td.thing_class = ThingClass::service;
  add_action_status(td);

  if (service == "planner-coverage") {
    td.title = "Area coverage planner";
    ActionAffordance a;
    a.description = "near-square grid decomposition with one cell-center slot per drone";
    a.input.fields["origin_x"] = field(FieldType::number, false);
    a.input.fields["origin_y"] = field(FieldType::number, false);
    a.input.fields["width"] = positive_number();
    a.input.fields["height"] = positive_number();
    a.input.fields["n"] = field(FieldType::integer);
    a.input.fields["n"].minimum = 1.0;
    a.input.fields["fov_deg"] = positive_number();
    a.input.fields["fov_deg"].maximum = 180.0;
    a.input.fields["alt_min"] = positive_number();
    a.input.fields["alt_max"] = positive_number();
    a.output.fields["rows"] = field(FieldType::integer);
    a.output.fields["cols"] = field(FieldType::integer);
    a.output.fields["cell_w"] = field(FieldType::number);
    a.output.fields["cell_h"] = field(FieldType::number);
    a.output.fields["r_cell"] = field(FieldType::number);
    a.output.fields["altitude"] = field(FieldType::number);
    a.output.fields["clamped"] = field(FieldType::boolean);
    a.output.fields["slots"] = object_array();
    td.actions["plan_area_coverage"] = a;
  } else if (service == "planner-formation") {
    td.title = "Formation planner";
    ActionAffordance a;
    a.description = "slot coordinates for line, circle, and star formations";
    a.input.fields["shape"] = field(FieldType::string);
    a.input.fields["center_x"] = field(FieldType::number);
    a.input.fields["center_y"] = field(FieldType::number);
    a.input.fields["orientation"] = field(FieldType::number, false);
    a.input.fields["spacing"] = positive_number();
    a.input.fields["n"] = field(FieldType::integer);
    a.input.fields["n"].minimum = 1.0;
    a.input.fields["altitude"] = positive_number();
    a.input.fields["positions"] = object_array(false);
    a.input.fields["objective"] = field(FieldType::string, false);
    a.output.fields["shape"] = field(FieldType::string);
    a.output.fields["center_x"] = field(FieldType::number);
    a.output.fields["center_y"] = field(FieldType::number);
    a.output.fields["orientation"] = field(FieldType::number);
    a.output.fields["spacing"] = field(FieldType::number);
    a.output.fields["altitude"] = field(FieldType::number);
    a.output.fields["slots"] = object_array();
    a.output.fields["assignment"] = field(FieldType::object, false);
    td.actions["plan_drone_formation"] = a;
  } else {
    throw DomainError("UnknownThing", "no such planner service: " + service);
  }

  td.rebuild_forms();
  return td;
}

void register_world_things(Servient& servient, sim::World& world) {
  for (const auto& id : world.drone_ids()) {
    servient.register_thing(build_uav_td(world, id));

    servient.bind_action(id, "arm", [&world, id](const json&) {
      world.cmd_arm(id);
      return json{{"ok", true}};
    });
    servient.bind_action(id, "disarm", [&world, id](const json&) {
      world.cmd_disarm(id);
      return json{{"ok", true}};
    });
    servient.bind_action(id, "takeoff", [&world, id](const json& in) {
      world.cmd_takeoff(id, in.at("alt").get<double>());
      return json{{"ok", true}};
    });
    servient.bind_action(id, "goto", [&world, id](const json& in) {
      world.cmd_goto(id, in.at("x").get<double>(), in.at("y").get<double>(),
                     in.at("alt").get<double>());
      return json{{"ok", true}};
    });
    servient.bind_action(id, "land", [&world, id](const json&) {
      world.cmd_land(id);
      return json{{"ok", true}};
    });
    servient.bind_action(id, "rtl", [&world, id](const json&) {
      world.cmd_rtl(id);
      return json{{"ok", true}};
    });
    servient.bind_action(id, "set_mode", [&world, id](const json& in) {
      world.set_mode(id, in.at("mode").get<std::string>());
      return json{{"ok", true}};
    });

    servient.bind_property(id, "position",
                           [&world, id] { return vec_json(world.read_telemetry(id).position); });
    servient.bind_property(id, "mode",
                           [&world, id] { return json(to_string(world.read_telemetry(id).mode)); });
    servient.bind_property(id, "armed",
                           [&world, id] { return json(world.read_telemetry(id).armed); });
    servient.bind_property(id, "battery",
                           [&world, id] { return json(world.read_telemetry(id).battery_mah); });
    servient.bind_property(id, "airborne",
                           [&world, id] { return json(world.read_telemetry(id).airborne); });
    servient.bind_property(
        id, "cruise_speed", [&world, id] { return json(world.drone(id).cruise_speed); },
        [&world, id](const json& v) { world.set_cruise_speed(id, v.get<double>()); });
    bind_idle_status(servient, id);
  }

  for (const auto& id : world.device_ids()) {
    const auto dev = world.device(id);
    if (dev.kind == sim::DeviceKind::irrigation_actuator) {
      servient.register_thing(build_actuator_td(world, id));
      servient.bind_action(id, "trigger", [&world, id](const json&) {
        world.trigger_irrigation(id);
        return json{{"ok", true}};
      });
      servient.bind_property(id, "triggered",
                             [&world, id] { return json(world.device(id).triggered); });
    } else {
      servient.register_thing(build_sensor_td(world, id));
      servient.bind_action(id, "sample", [&world, id](const json& in) {
        const double v = world.sample_sensor(id, in.at("requester_id").get<std::string>());
        return json{{"value", v}};
      });
    }
    servient.bind_property(id, "position",
                           [&world, id] { return vec_json(world.device(id).position); });
    servient.bind_property(id, "comm_range",
                           [&world, id] { return json(world.device(id).comm_range_m); });
    bind_idle_status(servient, id);
  }
}

void register_planner_things(Servient& servient) {
  servient.register_thing(build_service_td("planner-coverage"));
  servient.bind_action("planner-coverage", "plan_area_coverage",
                       [](const json& in) { return run_coverage_planner(in); });
  bind_idle_status(servient, "planner-coverage");

  servient.register_thing(build_service_td("planner-formation"));
  servient.bind_action("planner-formation", "plan_drone_formation",
                       [](const json& in) { return run_formation_planner(in); });
  bind_idle_status(servient, "planner-formation");
}

}  // namespace swarmloop::wot
