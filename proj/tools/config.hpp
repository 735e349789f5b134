#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace cfs::cli {

using Json = nlohmann::json;

enum class Kind { integer, real, boolean, string, int_list, real_list, object };

struct Field {
  std::string key;
  Kind kind = Kind::real;
  bool required = true;
  Json fallback;                // used when an optional key is absent
  std::vector<Field> children;  // object fields
};

using Schema = std::vector<Field>;

// Checks types, rejects unknown keys, fills defaults and returns the
// effective configuration. Errors are cfs::Error(schema_error) whose message
// names the offending key with its dotted path.
Json apply_schema(const Json& config, const Schema& schema, const std::string& path = "");

// Keys shared by every command: units (must be "natural"), seed, threads.
Schema with_common_fields(Schema schema);

// The schema of a command, or throws invalid_argument for unknown names.
const Schema& command_schema(const std::string& command);
const std::vector<std::string>& command_names();

}  // namespace cfs::cli
