#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/value.hpp"

namespace odf {

enum class column_type { string_t, int64_t_, float64_t, bool_t, timestamp_t };

const char* column_type_name(column_type t);
std::optional<column_type> column_type_from_name(std::string_view s);

struct column_def {
  std::string name;
  column_type type = column_type::string_t;
  bool nullable = false;
  bool operator==(const column_def&) const = default;
};

// Envelope field names; payload columns may not shadow them.
bool is_reserved_column_name(std::string_view name);
// Shared identifier shape for column and dataset names: the query dialect
// must be able to reference both.
bool is_identifier(std::string_view name);

struct schema_def {
  std::vector<column_def> columns;

  const column_def* find(std::string_view name) const;
  bool operator==(const schema_def&) const = default;
};

// Throws schema_violation unless: non-empty, unique identifier-shaped names,
// no reserved names.
void validate_schema(const schema_def& s);

// True when `s2` only adds nullable columns on top of `s1` (existing columns
// byte-identical, order preserved for the shared prefix set).
bool is_nullable_extension(const schema_def& s1, const schema_def& s2);

// A value fits a column type. Timestamp-shaped strings normalize into
// timestamps at construction, so a time value never satisfies a string
// column; sources carrying such strings are rejected rather than re-typed.
bool value_fits(const value& v, column_type t);

value schema_to_value(const schema_def& s);
schema_def schema_from_value(const value& v);

}  // namespace odf
