#include "swarmloop/wot/td.hpp"

namespace swarmloop::wot {

std::string to_string(ThingClass c) {
  switch (c) {
    case ThingClass::physical: return "physical";
    case ThingClass::virtual_thing: return "virtual";
    case ThingClass::service: return "service";
  }
  return "physical";
}

ThingClass thing_class_from_string(const std::string& s) {
  if (s == "physical") return ThingClass::physical;
  if (s == "virtual") return ThingClass::virtual_thing;
  if (s == "service") return ThingClass::service;
  throw DomainError("MalformedSchema", "unknown thing class: " + s);
}

json PropertyAffordance::to_json() const {
  json j = value.to_json();
  j["readOnly"] = read_only;
  if (!description.empty()) j["description"] = description;
  return j;
}

PropertyAffordance PropertyAffordance::from_json(const json& j) {
  PropertyAffordance p;
  p.value = FieldSpec::from_json(j, true);
  p.read_only = j.value("readOnly", true);
  p.description = j.value("description", "");
  return p;
}

json ActionAffordance::to_json() const {
  json j{{"input", input.to_json()}, {"output", output.to_json()}};
  if (!description.empty()) j["description"] = description;
  return j;
}

ActionAffordance ActionAffordance::from_json(const json& j) {
  ActionAffordance a;
  if (j.contains("input")) a.input = Schema::from_json(j.at("input"));
  if (j.contains("output")) a.output = Schema::from_json(j.at("output"));
  a.description = j.value("description", "");
  return a;
}

json EventAffordance::to_json() const {
  json j{{"data", data.to_json()}};
  if (!description.empty()) j["description"] = description;
  return j;
}

EventAffordance EventAffordance::from_json(const json& j) {
  EventAffordance e;
  if (j.contains("data")) e.data = FieldSpec::from_json(j.at("data"), true);
  e.description = j.value("description", "");
  return e;
}

void ThingDescription::rebuild_forms() {
  forms.clear();
  for (const auto& [name, prop] : properties) {
    forms.push_back({"/things/" + id + "/properties/" + name, "readproperty"});
    if (!prop.read_only)
      forms.push_back({"/things/" + id + "/properties/" + name, "writeproperty"});
  }
  for (const auto& [name, action] : actions) {
    (void)action;
    forms.push_back({"/things/" + id + "/actions/" + name, "invokeaction"});
  }
}

void ThingDescription::validate() const {
  if (id.empty()) throw DomainError("MalformedSchema", "thing id must be non-empty");
  for (const auto& [name, prop] : properties) prop.value.assert_well_formed(name);
  for (const auto& [name, action] : actions) {
    (void)name;
    action.input.assert_well_formed();
    action.output.assert_well_formed();
  }
  const std::string prop_prefix = "/things/" + id + "/properties/";
  const std::string action_prefix = "/things/" + id + "/actions/";
  for (const auto& form : forms) {
    if (form.href.rfind(prop_prefix, 0) == 0) {
      const auto name = form.href.substr(prop_prefix.size());
      if (!properties.count(name))
        throw DomainError("MalformedSchema", "form references missing property " + name);
    } else if (form.href.rfind(action_prefix, 0) == 0) {
      const auto name = form.href.substr(action_prefix.size());
      if (!actions.count(name))
        throw DomainError("MalformedSchema", "form references missing action " + name);
    } else {
      throw DomainError("MalformedSchema", "form href outside this thing: " + form.href);
    }
  }
}

json ThingDescription::to_json() const {
  json props = json::object();
  for (const auto& [name, p] : properties) props[name] = p.to_json();
  json acts = json::object();
  for (const auto& [name, a] : actions) acts[name] = a.to_json();
  json evts = json::object();
  for (const auto& [name, e] : events) evts[name] = e.to_json();
  json fms = json::array();
  for (const auto& f : forms) fms.push_back(f.to_json());
  return json{{"id", id},
              {"title", title},
              {"thing_class", to_string(thing_class)},
              {"properties", std::move(props)},
              {"actions", std::move(acts)},
              {"events", std::move(evts)},
              {"forms", std::move(fms)}};
}

ThingDescription ThingDescription::from_json(const json& j) {
  ThingDescription td;
  td.id = j.at("id").get<std::string>();
  td.title = j.value("title", "");
  td.thing_class = thing_class_from_string(j.value("thing_class", "physical"));
  if (j.contains("properties"))
    for (const auto& [name, p] : j.at("properties").items())
      td.properties[name] = PropertyAffordance::from_json(p);
  if (j.contains("actions"))
    for (const auto& [name, a] : j.at("actions").items())
      td.actions[name] = ActionAffordance::from_json(a);
  if (j.contains("events"))
    for (const auto& [name, e] : j.at("events").items())
      td.events[name] = EventAffordance::from_json(e);
  if (j.contains("forms"))
    for (const auto& f : j.at("forms")) td.forms.push_back(Form::from_json(f));
  return td;
}

}  // namespace swarmloop::wot
