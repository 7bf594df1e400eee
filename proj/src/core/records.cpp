#include "core/records.hpp"

#include <algorithm>

#include "core/errors.hpp"

namespace odf {

const char* observed_name(observed_op op) {
  switch (op) {
    case observed_op::append: return "A";
    case observed_op::retract: return "R";
    case observed_op::correct: return "C";
  }
  return "?";
}

std::optional<observed_op> observed_from_name(std::string_view s) {
  if (s == "A") return observed_op::append;
  if (s == "R") return observed_op::retract;
  if (s == "C") return observed_op::correct;
  return std::nullopt;
}

value slice_ref_to_value(const slice_ref& r) {
  value::map_t m;
  m.emplace("event_time_max", value::time_ms(r.event_time_max));
  m.emplace("event_time_min", value::time_ms(r.event_time_min));
  m.emplace("offset_end", value::integer(static_cast<int64_t>(r.offset_end)));
  m.emplace("offset_start", value::integer(static_cast<int64_t>(r.offset_start)));
  m.emplace("record_count", value::integer(static_cast<int64_t>(r.record_count)));
  m.emplace("slice_hash", value::string(r.slice_hash));
  return value::map(std::move(m));
}

namespace {

const value& want(const value::map_t& m, const char* key, value_kind k,
                  const char* what) {
  auto it = m.find(key);
  if (it == m.end() || it->second.kind() != k)
    raise(errc::decode_error, std::string(what) + ": bad field '" + key + "'");
  return it->second;
}

uint64_t want_nonneg(const value::map_t& m, const char* key, const char* what) {
  int64_t v = want(m, key, value_kind::integer, what).as_int();
  if (v < 0)
    raise(errc::decode_error, std::string(what) + ": negative '" + key + "'");
  return static_cast<uint64_t>(v);
}

}  // namespace

slice_ref slice_ref_from_value(const value& v) {
  if (v.kind() != value_kind::map)
    raise(errc::decode_error, "slice ref: expected map");
  const auto& m = v.as_map();
  if (m.size() != 6) raise(errc::decode_error, "slice ref: wrong field count");
  slice_ref r;
  r.event_time_max = want(m, "event_time_max", value_kind::time, "slice ref").as_time().ms;
  r.event_time_min = want(m, "event_time_min", value_kind::time, "slice ref").as_time().ms;
  r.offset_end = want_nonneg(m, "offset_end", "slice ref");
  r.offset_start = want_nonneg(m, "offset_start", "slice ref");
  r.record_count = want_nonneg(m, "record_count", "slice ref");
  r.slice_hash = want(m, "slice_hash", value_kind::string, "slice ref").as_string();
  if (!is_object_hash(r.slice_hash))
    raise(errc::decode_error, "slice ref: malformed slice_hash");
  if (r.offset_end < r.offset_start ||
      r.record_count != r.offset_end - r.offset_start ||
      r.record_count == 0 || r.event_time_min > r.event_time_max)
    raise(errc::decode_error, "slice ref: inconsistent fields");
  return r;
}

void validate_record(const record& r, const schema_def& schema,
                     bool with_observed) {
  if (with_observed != r.observed.has_value())
    raise(errc::schema_violation,
          with_observed ? "record missing observed field"
                        : "record carries unexpected observed field");
  if (r.payload.size() != schema.columns.size())
    raise(errc::schema_violation,
          "record has " + std::to_string(r.payload.size()) +
              " payload fields, schema has " +
              std::to_string(schema.columns.size()));
  for (const auto& col : schema.columns) {
    auto it = r.payload.find(col.name);
    if (it == r.payload.end())
      raise(errc::schema_violation, "record missing column '" + col.name + "'");
    const value& v = it->second;
    if (v.is_null()) {
      if (!col.nullable)
        raise(errc::schema_violation,
              "null in non-nullable column '" + col.name + "'");
    } else if (!value_fits(v, col.type)) {
      raise(errc::schema_violation,
            "value does not fit column '" + col.name + "' of type " +
                column_type_name(col.type));
    }
  }
}

value record_to_value(const record& r) {
  value::map_t m = r.payload;
  m.emplace("offset", value::integer(static_cast<int64_t>(r.offset)));
  m.emplace("system_time", value::time_ms(r.system_time));
  m.emplace("event_time", value::time_ms(r.event_time));
  if (r.observed)
    m.emplace("observed", value::string(observed_name(*r.observed)));
  return value::map(std::move(m));
}

record record_from_value(const value& v, const schema_def& schema,
                         bool with_observed) {
  record r = record_from_value_generic(v);
  validate_record(r, schema, with_observed);
  return r;
}

record record_from_value_generic(const value& v) {
  if (v.kind() != value_kind::map)
    raise(errc::decode_error, "record: expected map");
  value::map_t m = v.as_map();
  record r;
  auto take = [&](const char* key, value_kind k) {
    auto it = m.find(key);
    if (it == m.end() || it->second.kind() != k)
      raise(errc::decode_error, std::string("record: bad field '") + key + "'");
    value out = std::move(it->second);
    m.erase(it);
    return out;
  };
  int64_t off = take("offset", value_kind::integer).as_int();
  if (off < 0) raise(errc::decode_error, "record: negative offset");
  r.offset = static_cast<uint64_t>(off);
  r.system_time = take("system_time", value_kind::time).as_time().ms;
  r.event_time = take("event_time", value_kind::time).as_time().ms;
  if (auto it = m.find("observed"); it != m.end()) {
    if (it->second.kind() != value_kind::string)
      raise(errc::decode_error, "record: bad observed field");
    auto op = observed_from_name(it->second.as_string());
    if (!op) raise(errc::decode_error, "record: unknown observed verb");
    r.observed = *op;
    m.erase(it);
  }
  r.payload = std::move(m);
  return r;
}

std::pair<int64_t, int64_t> event_time_range(const std::vector<record>& records) {
  if (records.empty()) raise(errc::empty_slice, "no records");
  int64_t lo = records[0].event_time, hi = records[0].event_time;
  for (const auto& r : records) {
    lo = std::min(lo, r.event_time);
    hi = std::max(hi, r.event_time);
  }
  return {lo, hi};
}

std::pair<slice_ref, std::string> encode_slice(
    const std::vector<record>& records, const schema_def& schema,
    bool with_observed) {
  if (records.empty()) raise(errc::empty_slice, "refusing to write empty slice");
  validate_schema(schema);
  std::string bytes;
  for (size_t i = 0; i < records.size(); ++i) {
    const record& r = records[i];
    if (r.offset != records[0].offset + i)
      raise(errc::offset_gap,
            "offsets must be dense: expected " +
                std::to_string(records[0].offset + i) + ", got " +
                std::to_string(r.offset));
    if (r.system_time != records[0].system_time)
      raise(errc::schema_violation, "records in a slice share one system_time");
    validate_record(r, schema, with_observed);
    bytes += canonical_encode(record_to_value(r));
    bytes += '\n';
  }
  auto [lo, hi] = event_time_range(records);
  slice_ref ref;
  ref.slice_hash = sha256_hex(bytes);
  ref.offset_start = records.front().offset;
  ref.offset_end = records.back().offset + 1;
  ref.event_time_min = lo;
  ref.event_time_max = hi;
  ref.record_count = records.size();
  return {ref, std::move(bytes)};
}

slice_ref write_slice(object_store& store, const std::vector<record>& records,
                      const schema_def& schema, bool with_observed) {
  auto [ref, bytes] = encode_slice(records, schema, with_observed);
  store.put(bytes);
  return ref;
}

void check_slice_envelope(const object_store& store, const slice_ref& ref,
                          int64_t block_system_time) {
  std::string bytes = store.get(ref.slice_hash);
  uint64_t n = 0;
  int64_t lo = 0, hi = 0;
  size_t start = 0;
  while (start < bytes.size()) {
    size_t nl = bytes.find('\n', start);
    if (nl == std::string::npos)
      raise(errc::decode_error, "slice: missing trailing newline");
    value v = canonical_decode(std::string_view(bytes).substr(start, nl - start));
    if (v.kind() != value_kind::map)
      raise(errc::decode_error, "slice: record is not a map");
    const auto& m = v.as_map();
    uint64_t off = want_nonneg(m, "offset", "slice record");
    if (off != ref.offset_start + n)
      raise(errc::decode_error, "slice: offsets do not match ref");
    int64_t st = want(m, "system_time", value_kind::time, "slice record").as_time().ms;
    if (st != block_system_time)
      raise(errc::decode_error, "slice: system_time differs from block");
    int64_t et = want(m, "event_time", value_kind::time, "slice record").as_time().ms;
    if (auto it = m.find("observed"); it != m.end()) {
      if (it->second.kind() != value_kind::string ||
          !observed_from_name(it->second.as_string()))
        raise(errc::decode_error, "slice: bad observed verb");
    }
    lo = n == 0 ? et : std::min(lo, et);
    hi = n == 0 ? et : std::max(hi, et);
    ++n;
    start = nl + 1;
  }
  if (n == 0) raise(errc::decode_error, "slice: no records");
  if (n != ref.record_count)
    raise(errc::decode_error, "slice: record_count mismatch");
  if (ref.offset_start + n != ref.offset_end)
    raise(errc::decode_error, "slice: offset_end mismatch");
  if (lo != ref.event_time_min || hi != ref.event_time_max)
    raise(errc::decode_error, "slice: event_time range mismatch");
}

std::vector<record> read_slice(const object_store& store, const slice_ref& ref,
                               const schema_def& schema, bool with_observed) {
  std::string bytes = store.get(ref.slice_hash);
  std::vector<record> out;
  size_t start = 0;
  while (start < bytes.size()) {
    size_t nl = bytes.find('\n', start);
    if (nl == std::string::npos)
      raise(errc::decode_error, "slice: missing trailing newline");
    out.push_back(record_from_value(
        canonical_decode(std::string_view(bytes).substr(start, nl - start)),
        schema, with_observed));
    start = nl + 1;
  }
  if (out.empty()) raise(errc::decode_error, "slice: no records");
  if (out.size() != ref.record_count)
    raise(errc::decode_error, "slice: record_count mismatch");
  for (size_t i = 0; i < out.size(); ++i)
    if (out[i].offset != ref.offset_start + i)
      raise(errc::decode_error, "slice: offsets do not match ref");
  if (out.back().offset + 1 != ref.offset_end)
    raise(errc::decode_error, "slice: offset_end mismatch");
  auto [lo, hi] = event_time_range(out);
  if (lo != ref.event_time_min || hi != ref.event_time_max)
    raise(errc::decode_error, "slice: event_time range mismatch");
  return out;
}

}  // namespace odf
