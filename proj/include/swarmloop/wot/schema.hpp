#pragma once

#include <map>
#include <optional>
#include <string>

#include "swarmloop/common.hpp"

namespace swarmloop::wot {

enum class FieldType { number, integer, string, boolean, array, object, any };

std::string to_string(FieldType t);
FieldType field_type_from_string(const std::string& s);  // throws MalformedSchema

/// Constraint on one value: a primitive type plus optional numeric bounds.
struct FieldSpec {
  FieldType type = FieldType::any;
  std::optional<double> minimum;
  std::optional<double> maximum;
  std::optional<double> exclusive_minimum;
  bool required = true;
  std::optional<FieldType> item_type;  // element type check for arrays

  /// Throws SchemaViolation naming `path` when the value does not conform.
  void check(const json& value, const std::string& path) const;
  void assert_well_formed(const std::string& path) const;  // throws MalformedSchema

  json to_json() const;
  static FieldSpec from_json(const json& j, bool required_flag);
};

/// Flat object schema: named fields with specs, unknown fields rejected.
struct Schema {
  std::map<std::string, FieldSpec> fields;
  bool allow_extra = false;

  /// Throws SchemaViolation on the first nonconforming field.
  void validate(const json& doc) const;
  void assert_well_formed() const;

  json to_json() const;
  static Schema from_json(const json& j);
};

inline DomainError schema_violation(const std::string& field, const std::string& reason) {
  return DomainError("SchemaViolation", field + ": " + reason,
                     json{{"field", field}, {"reason", reason}});
}

}  // namespace swarmloop::wot
