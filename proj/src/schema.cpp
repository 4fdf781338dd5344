#include "privlabel/schema.hpp"

#include "privlabel/corpus.hpp"
#include "privlabel/error.hpp"

namespace privlabel {

namespace {

bool type_matches(const std::string& type, const nlohmann::json& doc) {
  if (type == "object") return doc.is_object();
  if (type == "array") return doc.is_array();
  if (type == "string") return doc.is_string();
  if (type == "boolean") return doc.is_boolean();
  if (type == "null") return doc.is_null();
  if (type == "number") return doc.is_number();
  if (type == "integer") {
    if (doc.is_number_integer()) return true;
    if (doc.is_number_float()) {
      const double v = doc.get<double>();
      return v == static_cast<double>(static_cast<long long>(v));
    }
    return false;
  }
  throw Error(ErrorKind::kValidation, "unsupported schema type '" + type + "'");
}

std::size_t utf8_length(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xc0) != 0x80;
  return n;
}

}  // namespace

JsonSchema::JsonSchema(nlohmann::json schema) : root_(std::move(schema)) {
  if (!root_.is_object()) throw Error(ErrorKind::kValidation, "schema must be an object");
}

JsonSchema JsonSchema::load(const std::filesystem::path& path) {
  return JsonSchema(read_json_file(path));
}

const nlohmann::json& JsonSchema::resolve(const std::string& ref) const {
  if (ref.rfind("#/", 0) != 0) {
    throw Error(ErrorKind::kValidation, "only local schema references are supported: " + ref);
  }
  const nlohmann::json::json_pointer ptr(ref.substr(1));
  if (!root_.contains(ptr)) throw Error(ErrorKind::kValidation, "unresolved reference " + ref);
  return root_.at(ptr);
}

std::vector<std::string> JsonSchema::validate(const nlohmann::json& doc) const {
  std::vector<std::string> errors;
  check(root_, doc, "", errors, 0);
  return errors;
}

void JsonSchema::check(const nlohmann::json& schema, const nlohmann::json& doc,
                       const std::string& where, std::vector<std::string>& errors,
                       int depth) const {
  if (depth > 64) throw Error(ErrorKind::kValidation, "schema recursion too deep");
  const std::string at = where.empty() ? "/" : where;
  if (schema.is_boolean()) {
    if (!schema.get<bool>()) errors.push_back(at + ": not allowed");
    return;
  }
  if (schema.contains("$ref")) {
    check(resolve(schema["$ref"].get<std::string>()), doc, where, errors, depth + 1);
    return;
  }
  if (schema.contains("type")) {
    const auto& t = schema["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = type_matches(t.get<std::string>(), doc);
    } else {
      for (const auto& alt : t) ok = ok || type_matches(alt.get<std::string>(), doc);
    }
    if (!ok) {
      errors.push_back(at + ": expected type " + t.dump() + ", got " + doc.type_name());
      return;
    }
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& v : schema["enum"]) found = found || v == doc;
    if (!found) errors.push_back(at + ": value " + doc.dump() + " not in enum");
  }
  if (schema.contains("const") && schema["const"] != doc) {
    errors.push_back(at + ": expected constant " + schema["const"].dump());
  }
  if (doc.is_number()) {
    const double v = doc.get<double>();
    if (schema.contains("minimum") && v < schema["minimum"].get<double>()) {
      errors.push_back(at + ": below minimum");
    }
    if (schema.contains("maximum") && v > schema["maximum"].get<double>()) {
      errors.push_back(at + ": above maximum");
    }
    if (schema.contains("exclusiveMinimum") && v <= schema["exclusiveMinimum"].get<double>()) {
      errors.push_back(at + ": not above exclusiveMinimum");
    }
  }
  if (doc.is_string() && schema.contains("minLength") &&
      utf8_length(doc.get_ref<const std::string&>()) < schema["minLength"].get<std::size_t>()) {
    errors.push_back(at + ": shorter than minLength");
  }
  if (doc.is_array()) {
    if (schema.contains("minItems") && doc.size() < schema["minItems"].get<std::size_t>()) {
      errors.push_back(at + ": fewer than minItems");
    }
    if (schema.contains("maxItems") && doc.size() > schema["maxItems"].get<std::size_t>()) {
      errors.push_back(at + ": more than maxItems");
    }
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < doc.size(); ++i) {
        check(schema["items"], doc[i], where + "/" + std::to_string(i), errors, depth + 1);
      }
    }
  }
  if (doc.is_object()) {
    if (schema.contains("required")) {
      for (const auto& key : schema["required"]) {
        if (!doc.contains(key.get<std::string>())) {
          errors.push_back(at + ": missing required property '" + key.get<std::string>() + "'");
        }
      }
    }
    const nlohmann::json empty = nlohmann::json::object();
    const auto& props = schema.contains("properties") ? schema["properties"] : empty;
    for (const auto& [key, value] : doc.items()) {
      const std::string child = where + "/" + key;
      if (props.contains(key)) {
        check(props[key], value, child, errors, depth + 1);
      } else if (schema.contains("additionalProperties")) {
        check(schema["additionalProperties"], value, child, errors, depth + 1);
      }
    }
  }
}

}  // namespace privlabel
