#include "core/schema.hpp"

#include <set>

#include "core/errors.hpp"

namespace odf {

const char* column_type_name(column_type t) {
  switch (t) {
    case column_type::string_t: return "string";
    case column_type::int64_t_: return "int64";
    case column_type::float64_t: return "float64";
    case column_type::bool_t: return "bool";
    case column_type::timestamp_t: return "timestamp";
  }
  return "?";
}

std::optional<column_type> column_type_from_name(std::string_view s) {
  if (s == "string") return column_type::string_t;
  if (s == "int64") return column_type::int64_t_;
  if (s == "float64") return column_type::float64_t;
  if (s == "bool") return column_type::bool_t;
  if (s == "timestamp") return column_type::timestamp_t;
  return std::nullopt;
}

bool is_reserved_column_name(std::string_view name) {
  return name == "offset" || name == "system_time" || name == "event_time" ||
         name == "observed";
}

bool is_identifier(std::string_view name) {
  if (name.empty() || name.size() > 64) return false;
  auto alpha = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
  };
  if (!alpha(name[0])) return false;
  for (char c : name.substr(1))
    if (!alpha(c) && !(c >= '0' && c <= '9')) return false;
  return true;
}

const column_def* schema_def::find(std::string_view name) const {
  for (const auto& c : columns)
    if (c.name == name) return &c;
  return nullptr;
}

void validate_schema(const schema_def& s) {
  if (s.columns.empty())
    raise(errc::schema_violation, "schema must have at least one column");
  std::set<std::string> seen;
  for (const auto& c : s.columns) {
    if (!is_identifier(c.name))
      raise(errc::schema_violation, "column name is not an identifier: '" + c.name + "'");
    if (is_reserved_column_name(c.name))
      raise(errc::schema_violation, "column name is reserved: '" + c.name + "'");
    if (!seen.insert(c.name).second)
      raise(errc::schema_violation, "duplicate column name: '" + c.name + "'");
  }
}

bool is_nullable_extension(const schema_def& s1, const schema_def& s2) {
  if (s2.columns.size() < s1.columns.size()) return false;
  for (size_t i = 0; i < s1.columns.size(); ++i)
    if (!(s1.columns[i] == s2.columns[i])) return false;
  for (size_t i = s1.columns.size(); i < s2.columns.size(); ++i)
    if (!s2.columns[i].nullable) return false;
  return true;
}

bool value_fits(const value& v, column_type t) {
  switch (t) {
    case column_type::string_t: return v.kind() == value_kind::string;
    case column_type::int64_t_: return v.kind() == value_kind::integer;
    case column_type::float64_t: return v.kind() == value_kind::floating;
    case column_type::bool_t: return v.kind() == value_kind::boolean;
    case column_type::timestamp_t: return v.kind() == value_kind::time;
  }
  return false;
}

value schema_to_value(const schema_def& s) {
  value::array_t cols;
  for (const auto& c : s.columns) {
    value::map_t m;
    m.emplace("name", value::string(c.name));
    m.emplace("nullable", value::boolean(c.nullable));
    m.emplace("type", value::string(column_type_name(c.type)));
    cols.push_back(value::map(std::move(m)));
  }
  value::map_t top;
  top.emplace("columns", value::array(std::move(cols)));
  return value::map(std::move(top));
}

schema_def schema_from_value(const value& v) {
  if (v.kind() != value_kind::map)
    raise(errc::decode_error, "schema: expected map");
  const auto& m = v.as_map();
  auto it = m.find("columns");
  if (it == m.end() || m.size() != 1 || it->second.kind() != value_kind::array)
    raise(errc::decode_error, "schema: expected {columns: [...]}");
  schema_def out;
  for (const auto& cv : it->second.as_array()) {
    if (cv.kind() != value_kind::map)
      raise(errc::decode_error, "schema column: expected map");
    const auto& cm = cv.as_map();
    auto name = cm.find("name");
    auto nullable = cm.find("nullable");
    auto type = cm.find("type");
    if (cm.size() != 3 || name == cm.end() || nullable == cm.end() ||
        type == cm.end() || name->second.kind() != value_kind::string ||
        nullable->second.kind() != value_kind::boolean ||
        type->second.kind() != value_kind::string)
      raise(errc::decode_error, "schema column: expected {name,nullable,type}");
    auto t = column_type_from_name(type->second.as_string());
    if (!t)
      raise(errc::decode_error,
            "schema column: unknown type '" + type->second.as_string() + "'");
    out.columns.push_back(
        {name->second.as_string(), *t, nullable->second.as_bool()});
  }
  validate_schema(out);
  return out;
}

}  // namespace odf
