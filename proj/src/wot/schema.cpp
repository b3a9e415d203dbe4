#include "swarmloop/wot/schema.hpp"

#include <cmath>
#include <set>

namespace swarmloop::wot {

namespace {

bool type_matches(FieldType type, const json& value) {
  switch (type) {
    case FieldType::number: return value.is_number();
    case FieldType::integer: return value.is_number_integer() || value.is_number_unsigned();
    case FieldType::string: return value.is_string();
    case FieldType::boolean: return value.is_boolean();
    case FieldType::array: return value.is_array();
    case FieldType::object: return value.is_object();
    case FieldType::any: return true;
  }
  return false;
}

}  // namespace

std::string to_string(FieldType t) {
  switch (t) {
    case FieldType::number: return "number";
    case FieldType::integer: return "integer";
    case FieldType::string: return "string";
    case FieldType::boolean: return "boolean";
    case FieldType::array: return "array";
    case FieldType::object: return "object";
    case FieldType::any: return "any";
  }
  return "any";
}

FieldType field_type_from_string(const std::string& s) {
  if (s == "number") return FieldType::number;
  if (s == "integer") return FieldType::integer;
  if (s == "string") return FieldType::string;
  if (s == "boolean") return FieldType::boolean;
  if (s == "array") return FieldType::array;
  if (s == "object") return FieldType::object;
  if (s == "any") return FieldType::any;
  throw DomainError("MalformedSchema", "unknown field type: " + s);
}

void FieldSpec::check(const json& value, const std::string& path) const {
  if (!type_matches(type, value))
    throw schema_violation(path, "expected " + to_string(type));
  if (value.is_number()) {
    const double v = value.get<double>();
    if (!std::isfinite(v)) throw schema_violation(path, "number must be finite");
    if (minimum && v < *minimum)
      throw schema_violation(path, "below minimum " + std::to_string(*minimum));
    if (maximum && v > *maximum)
      throw schema_violation(path, "above maximum " + std::to_string(*maximum));
    if (exclusive_minimum && v <= *exclusive_minimum)
      throw schema_violation(path,
                             "must exceed " + std::to_string(*exclusive_minimum));
  }
  if (value.is_array() && item_type) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (!type_matches(*item_type, value[i]))
        throw schema_violation(path + "[" + std::to_string(i) + "]",
                               "expected " + to_string(*item_type));
    }
  }
}

void FieldSpec::assert_well_formed(const std::string& path) const {
  if (minimum && maximum && *minimum > *maximum)
    throw DomainError("MalformedSchema", path + ": minimum exceeds maximum");
}

json FieldSpec::to_json() const {
  json j = json::object();
  if (type != FieldType::any) j["type"] = to_string(type);
  if (minimum) j["minimum"] = *minimum;
  if (maximum) j["maximum"] = *maximum;
  if (exclusive_minimum) j["exclusiveMinimum"] = *exclusive_minimum;
  if (item_type) j["items"] = json{{"type", to_string(*item_type)}};
  return j;
}

FieldSpec FieldSpec::from_json(const json& j, bool required_flag) {
  FieldSpec spec;
  spec.required = required_flag;
  if (j.contains("type")) spec.type = field_type_from_string(j.at("type").get<std::string>());
  if (j.contains("minimum")) spec.minimum = j.at("minimum").get<double>();
  if (j.contains("maximum")) spec.maximum = j.at("maximum").get<double>();
  if (j.contains("exclusiveMinimum"))
    spec.exclusive_minimum = j.at("exclusiveMinimum").get<double>();
  if (j.contains("items") && j.at("items").contains("type"))
    spec.item_type = field_type_from_string(j.at("items").at("type").get<std::string>());
  spec.assert_well_formed("field");
  return spec;
}

void Schema::validate(const json& doc) const {
  if (!doc.is_object()) throw schema_violation("$", "expected an object");
  if (!allow_extra) {
    for (const auto& [key, value] : doc.items()) {
      (void)value;
      if (!fields.count(key)) throw schema_violation(key, "unexpected field");
    }
  }
  for (const auto& [name, spec] : fields) {
    const auto it = doc.find(name);
    if (it == doc.end()) {
      if (spec.required) throw schema_violation(name, "missing required field");
      continue;
    }
    spec.check(*it, name);
  }
}

void Schema::assert_well_formed() const {
  for (const auto& [name, spec] : fields) spec.assert_well_formed(name);
}

json Schema::to_json() const {
  json props = json::object();
  json required = json::array();
  for (const auto& [name, spec] : fields) {
    props[name] = spec.to_json();
    if (spec.required) required.push_back(name);
  }
  json j{{"type", "object"}, {"properties", std::move(props)},
         {"additionalProperties", allow_extra}};
  if (!required.empty()) j["required"] = std::move(required);
  return j;
}

Schema Schema::from_json(const json& j) {
  Schema schema;
  schema.allow_extra = j.value("additionalProperties", false);
  std::set<std::string> required;
  if (j.contains("required"))
    for (const auto& name : j.at("required")) required.insert(name.get<std::string>());
  if (j.contains("properties")) {
    for (const auto& [name, spec] : j.at("properties").items()) {
      schema.fields[name] = FieldSpec::from_json(spec, required.count(name) > 0);
    }
  }
  return schema;
}

}  // namespace swarmloop::wot
