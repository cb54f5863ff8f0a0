#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace stresskit::json_schema {

/// Checks `instance` against a JSON Schema subset: type, enum, const, anyOf, required,
/// properties, additionalProperties, items, minItems, maxItems, minimum, maximum,
/// and local "#/$defs/..." references. Returns "path: problem" strings, empty when valid.
std::vector<std::string> validate(const nlohmann::ordered_json& instance, const nlohmann::ordered_json& schema);

/// Throws SchemaViolation listing the first problems found.
void require_valid(const nlohmann::ordered_json& instance, const nlohmann::ordered_json& schema);

}  // namespace stresskit::json_schema
