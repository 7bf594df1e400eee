#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "core/events.hpp"

namespace odf {

struct root_manifest {
  std::string name;
  std::string source_path;  // resolved against the workspace root when relative
  polling_source source;
};

struct derivative_manifest {
  std::string name;
  std::vector<std::string> inputs;  // must equal the query's table names
  std::string query;
  std::optional<std::string> engine;  // the builtin engine when absent
};

using dataset_manifest = std::variant<root_manifest, derivative_manifest>;

const std::string& manifest_name(const dataset_manifest& m);

// Shape and cross-field validation only; input names are resolved against a
// workspace later. Failures carry the YAML field path, e.g.
// "source.schema[2].type: unknown column type".
dataset_manifest parse_manifest(const std::string& yaml_text);
dataset_manifest load_manifest(const std::filesystem::path& file);

bool is_dataset_name(std::string_view s);

}  // namespace odf
