#pragma once

#include <filesystem>

#include <json.hpp>

namespace bpl {

/// Checks a document against the structural subset of JSON Schema used by the
/// shipped report schemas: "type" (string or array of strings), "properties",
/// "required" and "items". Throws DataError naming the offending path.
void validate_against_schema(const nlohmann::json& doc, const nlohmann::json& schema);

nlohmann::json load_json_file(const std::filesystem::path& path);

}  // namespace bpl
