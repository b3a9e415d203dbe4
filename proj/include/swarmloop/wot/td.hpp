#pragma once

#include <map>
#include <string>
#include <vector>

#include "swarmloop/wot/schema.hpp"

namespace swarmloop::wot {

enum class ThingClass { physical, virtual_thing, service };

std::string to_string(ThingClass c);
ThingClass thing_class_from_string(const std::string& s);  // throws MalformedSchema

struct Form {
  std::string href;  // /things/{id}/properties/{name} or /things/{id}/actions/{name}
  std::string op;    // readproperty | writeproperty | invokeaction

  json to_json() const { return json{{"href", href}, {"op", op}}; }
  static Form from_json(const json& j) {
    return {j.at("href").get<std::string>(), j.at("op").get<std::string>()};
  }
};

struct PropertyAffordance {
  FieldSpec value;
  bool read_only = true;
  std::string description;

  json to_json() const;
  static PropertyAffordance from_json(const json& j);
};

struct ActionAffordance {
  Schema input;
  Schema output;
  std::string description;

  json to_json() const;
  static ActionAffordance from_json(const json& j);
};

struct EventAffordance {
  FieldSpec data;
  std::string description;

  json to_json() const;
  static EventAffordance from_json(const json& j);
};

/// Machine-readable interface document for one Thing, restricted to the
/// field subset this framework discovers and invokes against.
struct ThingDescription {
  std::string id;
  std::string title;
  ThingClass thing_class = ThingClass::physical;
  std::map<std::string, PropertyAffordance> properties;
  std::map<std::string, ActionAffordance> actions;
  std::map<std::string, EventAffordance> events;
  std::vector<Form> forms;

  /// Regenerates forms from the declared affordances.
  void rebuild_forms();
  /// Throws MalformedSchema when a form references a missing affordance,
  /// a schema is ill-formed, or the id is empty.
  void validate() const;

  json to_json() const;
  static ThingDescription from_json(const json& j);
};

}  // namespace swarmloop::wot
