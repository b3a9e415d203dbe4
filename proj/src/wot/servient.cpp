#include "swarmloop/wot/servient.hpp"

namespace swarmloop::wot {

void Servient::register_thing(ThingDescription td) {
  td.validate();
  std::lock_guard lock(mu_);
  if (things_.count(td.id))
    throw DomainError("DuplicateThing", "thing already registered: " + td.id);
  auto id = td.id;
  things_[id].td = std::move(td);
}

void Servient::bind_action(const std::string& thing_id, const std::string& name,
                           ActionHandler handler) {
  std::lock_guard lock(mu_);
  auto it = things_.find(thing_id);
  if (it == things_.end()) throw DomainError("UnknownThing", "no such thing: " + thing_id);
  if (!it->second.td.actions.count(name))
    throw DomainError("UnknownAffordance", thing_id + " declares no action " + name);
  it->second.actions[name] = std::move(handler);
}

void Servient::bind_property(const std::string& thing_id, const std::string& name,
                             PropertyReader reader, PropertyWriter writer) {
  std::lock_guard lock(mu_);
  auto it = things_.find(thing_id);
  if (it == things_.end()) throw DomainError("UnknownThing", "no such thing: " + thing_id);
  if (!it->second.td.properties.count(name))
    throw DomainError("UnknownAffordance", thing_id + " declares no property " + name);
  it->second.properties[name] = {std::move(reader), std::move(writer)};
}

json Servient::invoke_affordance(const std::string& thing_id, AffordanceKind kind,
                                 const std::string& name, const json& input) {
  // Resolve schema and handler under the lock, run the handler outside it:
  // handlers reach into the world, which serializes on its own mutex.
  ActionHandler action;
  PropertyBinding property;
  Schema input_schema, output_schema;
  FieldSpec value_spec;
  bool read_only = false;
  {
    std::lock_guard lock(mu_);
    auto it = things_.find(thing_id);
    if (it == things_.end()) throw DomainError("UnknownThing", "no such thing: " + thing_id);
    const auto& entry = it->second;
    if (kind == AffordanceKind::action) {
      auto af = entry.td.actions.find(name);
      if (af == entry.td.actions.end())
        throw DomainError("UnknownAffordance", thing_id + " declares no action " + name);
      auto h = entry.actions.find(name);
      if (h == entry.actions.end())
        throw DomainError("UnknownAffordance", thing_id + " action " + name + " is not bound");
      action = h->second;
      input_schema = af->second.input;
      output_schema = af->second.output;
    } else {
      auto af = entry.td.properties.find(name);
      if (af == entry.td.properties.end())
        throw DomainError("UnknownAffordance", thing_id + " declares no property " + name);
      auto b = entry.properties.find(name);
      if (b == entry.properties.end())
        throw DomainError("UnknownAffordance", thing_id + " property " + name + " is not bound");
      property = b->second;
      value_spec = af->second.value;
      read_only = af->second.read_only;
    }
  }

  switch (kind) {
    case AffordanceKind::action: {
      input_schema.validate(input);
      json out = action(input);
      try {
        output_schema.validate(out);
      } catch (const DomainError& e) {
        throw DomainError("OutputSchemaViolation",
                          thing_id + "." + name + " produced nonconforming output: " + e.what(),
                          e.detail());
      }
      return out;
    }
    case AffordanceKind::property_read: {
      json out = property.read();
      try {
        value_spec.check(out, name);
      } catch (const DomainError& e) {
        throw DomainError("OutputSchemaViolation",
                          thing_id + "." + name + " read nonconforming value: " + e.what(),
                          e.detail());
      }
      return out;
    }
    case AffordanceKind::property_write: {
      if (read_only || !property.write)
        throw DomainError("ReadOnlyProperty", thing_id + "." + name + " is not writable");
      value_spec.check(input, name);
      property.write(input);
      return json{{"ok", true}};
    }
  }
  throw DomainError("UnknownAffordance", "unreachable affordance kind");
}

bool Servient::has_thing(const std::string& id) const {
  std::lock_guard lock(mu_);
  return things_.count(id) > 0;
}

ThingDescription Servient::td(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = things_.find(id);
  if (it == things_.end()) throw DomainError("UnknownThing", "no such thing: " + id);
  return it->second.td;
}

std::vector<std::string> Servient::thing_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, entry] : things_) {
    (void)entry;
    ids.push_back(id);
  }
  return ids;
}

}  // namespace swarmloop::wot
