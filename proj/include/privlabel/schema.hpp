#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace privlabel {

// Validator for the subset of JSON Schema the published schemas use:
// type (string or list), properties, required, additionalProperties (bool or
// schema), items, enum, const, minimum, maximum, exclusiveMinimum,
// minLength, minItems, maxItems, and local
// "#/definitions/..." or "#/$defs/..." references.
class JsonSchema {
 public:
  explicit JsonSchema(nlohmann::json schema);
  static JsonSchema load(const std::filesystem::path& path);

  // Empty result means valid. Each entry is "<json pointer>: <problem>".
  std::vector<std::string> validate(const nlohmann::json& doc) const;
  bool is_valid(const nlohmann::json& doc) const { return validate(doc).empty(); }

 private:
  void check(const nlohmann::json& schema, const nlohmann::json& doc, const std::string& where,
             std::vector<std::string>& errors, int depth) const;
  const nlohmann::json& resolve(const std::string& ref) const;

  nlohmann::json root_;
};

}  // namespace privlabel
