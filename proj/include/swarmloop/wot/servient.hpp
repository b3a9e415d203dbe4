#pragma once

#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "swarmloop/wot/td.hpp"

namespace swarmloop::wot {

enum class AffordanceKind { action, property_read, property_write };

/// In-process host for all Things. Dispatch validates inputs against the
/// declared schemas before invoking the bound handler and validates handler
/// outputs afterwards, so nothing crosses the boundary unchecked.
class Servient {
public:
  using ActionHandler = std::function<json(const json&)>;
  using PropertyReader = std::function<json()>;
  using PropertyWriter = std::function<void(const json&)>;

  /// Registers a TD after validating it. Throws DuplicateThing.
  void register_thing(ThingDescription td);

  /// Binding a handler for an affordance the TD does not declare throws
  /// UnknownAffordance: the TD is the complete interaction surface.
  void bind_action(const std::string& thing_id, const std::string& name, ActionHandler handler);
  void bind_property(const std::string& thing_id, const std::string& name, PropertyReader reader,
                     PropertyWriter writer = nullptr);

  /// Throws UnknownThing, UnknownAffordance, SchemaViolation, ReadOnlyProperty,
  /// or whatever domain error the handler raises (codes preserved).
  json invoke_affordance(const std::string& thing_id, AffordanceKind kind,
                         const std::string& name, const json& input = json::object());

  bool has_thing(const std::string& id) const;
  ThingDescription td(const std::string& id) const;  // throws UnknownThing
  std::vector<std::string> thing_ids() const;        // sorted

private:
  struct PropertyBinding {
    PropertyReader read;
    PropertyWriter write;
  };
  struct Entry {
    ThingDescription td;
    std::map<std::string, ActionHandler> actions;
    std::map<std::string, PropertyBinding> properties;
  };

  std::map<std::string, Entry> things_;
  mutable std::mutex mu_;
};

}  // namespace swarmloop::wot
