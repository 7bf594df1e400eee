#include "ingest/source.hpp"

#include <charconv>
#include <cmath>

#include <json.hpp>

#include "core/errors.hpp"
#include "ingest/csv.hpp"

namespace odf {

namespace {

[[noreturn]] void fail_row(size_t row, const std::string& what) {
  raise(errc::parse_failure, "source row " + std::to_string(row) + ": " + what);
}

value cell_from_text(const std::string& text, const column_def& col,
                     size_t row) {
  if (text.empty()) {
    if (!col.nullable)
      fail_row(row, "empty cell in non-nullable column '" + col.name + "'");
    return value::null();
  }
  switch (col.type) {
    case column_type::int64_t_: {
      int64_t n = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
      if (ec != std::errc() || p != text.data() + text.size())
        fail_row(row, "'" + text + "' is not an integer (column '" +
                          col.name + "')");
      return value::integer(n);
    }
    case column_type::float64_t: {
      double d = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), d);
      if (ec != std::errc() || p != text.data() + text.size() ||
          !std::isfinite(d))
        fail_row(row, "'" + text + "' is not a finite number (column '" +
                          col.name + "')");
      return value::floating(d);
    }
    case column_type::bool_t:
      if (text == "true") return value::boolean(true);
      if (text == "false") return value::boolean(false);
      fail_row(row, "'" + text + "' is not true/false (column '" + col.name +
                        "')");
    case column_type::timestamp_t: {
      auto ms = parse_timestamp_lenient(text);
      if (!ms)
        fail_row(row, "'" + text + "' is not a timestamp (column '" +
                          col.name + "')");
      return value::time_ms(*ms);
    }
    case column_type::string_t: {
      value v = value::string(text);
      // canonical timestamp shapes normalize to time values and would no
      // longer round-trip as strings
      if (v.kind() != value_kind::string)
        fail_row(row, "timestamp-shaped text in string column '" + col.name +
                          "'");
      return v;
    }
  }
  fail_row(row, "unreachable column type");
}

std::vector<value::map_t> parse_csv_source(std::string_view bytes,
                                           const polling_source& src) {
  auto rows = parse_csv(bytes);
  if (rows.empty()) raise(errc::parse_failure, "csv source has no header row");
  const auto& header = rows[0];
  const auto& cols = src.schema.columns;
  auto header_mismatch = [&] {
    std::string want;
    for (const auto& c : cols) {
      if (!want.empty()) want += ',';
      want += c.name;
    }
    raise(errc::parse_failure, "csv header must be exactly: " + want);
  };
  if (header.size() != cols.size()) header_mismatch();
  for (size_t i = 0; i < cols.size(); ++i)
    if (header[i] != cols[i].name) header_mismatch();

  std::vector<value::map_t> out;
  for (size_t i = 1; i < rows.size(); ++i) {
    size_t row_no = i;  // 1-based data row, header excluded
    if (rows[i].size() != cols.size())
      fail_row(row_no, "expected " + std::to_string(cols.size()) +
                           " cells, got " + std::to_string(rows[i].size()));
    value::map_t m;
    for (size_t c = 0; c < cols.size(); ++c)
      m.emplace(cols[c].name, cell_from_text(rows[i][c], cols[c], row_no));
    out.push_back(std::move(m));
  }
  return out;
}

// SAX handler that builds one shallow json row and rejects duplicate keys.
// Values stay as parsed tokens (the int/float distinction matters).
struct row_sax {
  size_t row_no;
  value::map_t fields;
  std::string pending_key;
  int depth = 0;
  bool done = false;

  bool set(value v) {
    if (depth == 0) fail_row(row_no, "line is not a json object");
    if (depth != 1) fail_row(row_no, "nested values are not supported");
    if (!fields.emplace(pending_key, std::move(v)).second)
      fail_row(row_no, "duplicate key '" + pending_key + "'");
    return true;
  }

  bool null() { return set(value::null()); }
  bool boolean(bool b) { return set(value::boolean(b)); }
  bool number_integer(int64_t n) { return set(value::integer(n)); }
  bool number_unsigned(uint64_t n) {
    if (n > static_cast<uint64_t>(INT64_MAX))
      fail_row(row_no, "integer out of range");
    return set(value::integer(static_cast<int64_t>(n)));
  }
  bool number_float(double d, const std::string&) {
    if (!std::isfinite(d)) fail_row(row_no, "non-finite number");
    return set(value::floating(d));
  }
  bool string(std::string& s) { return set(value::string(s)); }
  bool binary(nlohmann::json::binary_t&) {
    fail_row(row_no, "binary values are not supported");
  }
  bool start_object(size_t) {
    if (++depth > 1) fail_row(row_no, "nested objects are not supported");
    return true;
  }
  bool key(std::string& k) {
    pending_key = k;
    return true;
  }
  bool end_object() {
    --depth;
    done = true;
    return true;
  }
  bool start_array(size_t) { fail_row(row_no, "arrays are not supported"); }
  bool end_array() { return true; }
  bool parse_error(size_t, const std::string&,
                   const nlohmann::json::exception& ex) {
    fail_row(row_no, std::string("invalid json: ") + ex.what());
  }
};

value cell_from_json(value v, const column_def& col, size_t row) {
  if (v.is_null()) {
    if (!col.nullable)
      fail_row(row, "null in non-nullable column '" + col.name + "'");
    return v;
  }
  switch (col.type) {
    case column_type::int64_t_:
      if (v.kind() != value_kind::integer)
        fail_row(row, "column '" + col.name + "' needs an integer");
      return v;
    case column_type::float64_t:
      // 1 and 1.0 are different tokens; a float column takes only the latter
      if (v.kind() != value_kind::floating)
        fail_row(row, "column '" + col.name + "' needs a number with a "
                      "fractional part");
      return v;
    case column_type::bool_t:
      if (v.kind() != value_kind::boolean)
        fail_row(row, "column '" + col.name + "' needs a boolean");
      return v;
    case column_type::timestamp_t: {
      if (v.kind() == value_kind::time) return v;
      if (v.kind() == value_kind::string) {
        if (auto ms = parse_timestamp_lenient(v.as_string()))
          return value::time_ms(*ms);
      }
      fail_row(row, "column '" + col.name + "' needs a timestamp");
    }
    case column_type::string_t:
      if (v.kind() != value_kind::string)
        fail_row(row, v.kind() == value_kind::time
                          ? "timestamp-shaped text in string column '" +
                                col.name + "'"
                          : "column '" + col.name + "' needs a string");
      return v;
  }
  fail_row(row, "unreachable column type");
}

std::vector<value::map_t> parse_ndjson_source(std::string_view bytes,
                                              const polling_source& src) {
  std::vector<value::map_t> out;
  size_t start = 0;
  size_t row_no = 0;
  while (start < bytes.size()) {
    size_t nl = bytes.find('\n', start);
    std::string_view line = bytes.substr(
        start, nl == std::string_view::npos ? bytes.size() - start : nl - start);
    start = nl == std::string_view::npos ? bytes.size() : nl + 1;
    ++row_no;
    if (line.empty()) fail_row(row_no, "empty line");

    row_sax sax{row_no, {}, {}, 0, false};
    bool ok = nlohmann::json::sax_parse(line.begin(), line.end(), &sax,
                                        nlohmann::json::input_format_t::json,
                                        true);
    if (!ok || !sax.done) fail_row(row_no, "line is not a json object");

    value::map_t m;
    for (const auto& col : src.schema.columns) {
      auto it = sax.fields.find(col.name);
      if (it == sax.fields.end())
        fail_row(row_no, "missing column '" + col.name + "'");
      m.emplace(col.name, cell_from_json(std::move(it->second), col, row_no));
      sax.fields.erase(it);
    }
    if (!sax.fields.empty())
      fail_row(row_no, "unknown field '" + sax.fields.begin()->first + "'");
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace

std::vector<value::map_t> parse_source(std::string_view bytes,
                                       const polling_source& src) {
  if (bytes.substr(0, 3) == "\xef\xbb\xbf") bytes.remove_prefix(3);
  validate_polling_source(src);
  return src.format == source_format::csv ? parse_csv_source(bytes, src)
                                          : parse_ndjson_source(bytes, src);
}

}  // namespace odf
