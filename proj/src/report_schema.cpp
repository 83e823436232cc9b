#include "bpl/report_schema.hpp"

#include <fstream>

#include "bpl/errors.hpp"

namespace bpl {

namespace {

using nlohmann::json;

bool matches_type(const json& value, const std::string& type) {
  if (type == "object") return value.is_object();
  if (type == "array") return value.is_array();
  if (type == "string") return value.is_string();
  if (type == "number") return value.is_number();
  if (type == "integer") return value.is_number_integer();
  if (type == "boolean") return value.is_boolean();
  if (type == "null") return value.is_null();
  throw DataError("schema: unknown type '" + type + "'");
}

void validate(const json& value, const json& schema, const std::string& path) {
  if (schema.contains("type")) {
    const json& type = schema["type"];
    bool ok = false;
    if (type.is_string()) {
      ok = matches_type(value, type.get<std::string>());
    } else if (type.is_array()) {
      for (const json& t : type) {
        if (matches_type(value, t.get<std::string>())) {
          ok = true;
          break;
        }
      }
    }
    if (!ok) {
      throw DataError("schema violation at " + path + ": type mismatch (" +
                      type.dump() + " vs " + std::string(value.type_name()) + ")");
    }
  }
  if (schema.contains("required")) {
    for (const json& key : schema["required"]) {
      if (!value.is_object() || !value.contains(key.get<std::string>())) {
        throw DataError("schema violation at " + path + ": missing required key '" +
                        key.get<std::string>() + "'");
      }
    }
  }
  if (schema.contains("properties") && value.is_object()) {
    for (const auto& [key, sub] : schema["properties"].items()) {
      if (value.contains(key)) validate(value.at(key), sub, path + "." + key);
    }
  }
  if (schema.contains("items") && value.is_array()) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      validate(value[i], schema["items"], path + "[" + std::to_string(i) + "]");
    }
  }
}

}  // namespace

void validate_against_schema(const json& doc, const json& schema) {
  validate(doc, schema, "$");
}

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace bpl
