#include "core/events.hpp"

#include "core/errors.hpp"

namespace odf {

const char* dataset_kind_name(dataset_kind k) {
  return k == dataset_kind::root ? "root" : "derivative";
}
std::optional<dataset_kind> dataset_kind_from_name(std::string_view s) {
  if (s == "root") return dataset_kind::root;
  if (s == "derivative") return dataset_kind::derivative;
  return std::nullopt;
}

const char* source_format_name(source_format f) {
  return f == source_format::csv ? "csv" : "ndjson";
}
std::optional<source_format> source_format_from_name(std::string_view s) {
  if (s == "csv") return source_format::csv;
  if (s == "ndjson") return source_format::ndjson;
  return std::nullopt;
}

const char* merge_kind_name(merge_kind k) {
  return k == merge_kind::ledger ? "ledger" : "snapshot";
}
std::optional<merge_kind> merge_kind_from_name(std::string_view s) {
  if (s == "ledger") return merge_kind::ledger;
  if (s == "snapshot") return merge_kind::snapshot;
  return std::nullopt;
}

void validate_polling_source(const polling_source& p) {
  validate_schema(p.schema);
  if (p.allowed_lateness_ms < 0)
    raise(errc::schema_violation, "allowed_lateness_ms must be >= 0");
  if (p.merge.primary_key.empty())
    raise(errc::schema_violation, "merge strategy needs a primary key");
  for (const auto& k : p.merge.primary_key) {
    const column_def* col = p.schema.find(k);
    if (!col)
      raise(errc::schema_violation, "primary key column '" + k +
                                        "' is not in the schema");
    if (col->nullable)
      raise(errc::schema_violation,
            "primary key column '" + k + "' must not be nullable");
  }
  // duplicate key entries would make the key tuple degenerate
  for (size_t i = 0; i < p.merge.primary_key.size(); ++i)
    for (size_t j = i + 1; j < p.merge.primary_key.size(); ++j)
      if (p.merge.primary_key[i] == p.merge.primary_key[j])
        raise(errc::schema_violation, "duplicate primary key column '" +
                                          p.merge.primary_key[i] + "'");
  if (p.merge.kind == merge_kind::snapshot) {
    if (!p.event_time_column.empty())
      raise(errc::schema_violation,
            "snapshot sources take their event time from the observation "
            "time; event_time_column must be empty");
  } else {
    const column_def* col = p.schema.find(p.event_time_column);
    if (!col)
      raise(errc::schema_violation, "event_time_column '" +
                                        p.event_time_column +
                                        "' is not in the schema");
    if (col->type != column_type::timestamp_t || col->nullable)
      raise(errc::schema_violation,
            "event_time_column must be a non-nullable timestamp column");
  }
}

namespace {

const value& want(const value::map_t& m, const char* key, value_kind k,
                  const char* what) {
  auto it = m.find(key);
  if (it == m.end() || it->second.kind() != k)
    raise(errc::decode_error, std::string(what) + ": bad field '" + key + "'");
  return it->second;
}

// nullable fields: present with null, or the expected kind
std::optional<value> want_opt(const value::map_t& m, const char* key,
                              value_kind k, const char* what) {
  auto it = m.find(key);
  if (it == m.end())
    raise(errc::decode_error, std::string(what) + ": missing field '" + key + "'");
  if (it->second.is_null()) return std::nullopt;
  if (it->second.kind() != k)
    raise(errc::decode_error, std::string(what) + ": bad field '" + key + "'");
  return it->second;
}

uint64_t want_offset(const value::map_t& m, const char* key, const char* what) {
  int64_t v = want(m, key, value_kind::integer, what).as_int();
  if (v < 0)
    raise(errc::decode_error, std::string(what) + ": negative '" + key + "'");
  return static_cast<uint64_t>(v);
}

object_hash want_hash(const value::map_t& m, const char* key, const char* what) {
  const auto& s = want(m, key, value_kind::string, what).as_string();
  if (!is_object_hash(s))
    raise(errc::decode_error, std::string(what) + ": malformed hash '" + key + "'");
  return s;
}

void check_field_count(const value::map_t& m, size_t n, const char* what) {
  if (m.size() != n)
    raise(errc::decode_error, std::string(what) + ": wrong field count");
}

}  // namespace

object_hash engine_version_hash(const engine_version& v) {
  value::map_t m;
  m.emplace("name", value::string(v.name));
  m.emplace("plan_semantics_revision", value::integer(v.plan_semantics_revision));
  m.emplace("semantic_version", value::string(v.semantic_version));
  return sha256_hex(canonical_encode(value::map(std::move(m))));
}

value engine_version_to_value(const engine_version& v) {
  value::map_t m;
  m.emplace("name", value::string(v.name));
  m.emplace("plan_semantics_revision", value::integer(v.plan_semantics_revision));
  m.emplace("semantic_version", value::string(v.semantic_version));
  m.emplace("version_hash", value::string(engine_version_hash(v)));
  return value::map(std::move(m));
}

engine_version engine_version_from_value(const value& v) {
  if (v.kind() != value_kind::map)
    raise(errc::decode_error, "engine version: expected map");
  const auto& m = v.as_map();
  check_field_count(m, 4, "engine version");
  engine_version out;
  out.name = want(m, "name", value_kind::string, "engine version").as_string();
  out.plan_semantics_revision =
      want(m, "plan_semantics_revision", value_kind::integer, "engine version")
          .as_int();
  out.semantic_version =
      want(m, "semantic_version", value_kind::string, "engine version").as_string();
  auto h = want_hash(m, "version_hash", "engine version");
  if (h != engine_version_hash(out))
    raise(errc::decode_error, "engine version: version_hash mismatch");
  return out;
}

const char* event_kind_name(const metadata_event& e) {
  switch (e.index()) {
    case 0: return "Seed";
    case 1: return "SetPollingSource";
    case 2: return "SetTransform";
    case 3: return "AddData";
    case 4: return "ExecuteTransform";
    case 5: return "SetWatermark";
  }
  return "?";
}

value event_to_value(const metadata_event& e) {
  value::map_t m;
  m.emplace("kind", value::string(event_kind_name(e)));
  if (const auto* s = std::get_if<seed_event>(&e)) {
    m.emplace("dataset_kind", value::string(dataset_kind_name(s->kind)));
    m.emplace("dataset_name", value::string(s->dataset_name));
  } else if (const auto* p = std::get_if<set_polling_source_event>(&e)) {
    m.emplace("allowed_lateness_ms", value::integer(p->source.allowed_lateness_ms));
    m.emplace("event_time_column", value::string(p->source.event_time_column));
    m.emplace("format", value::string(source_format_name(p->source.format)));
    value::map_t mg;
    mg.emplace("kind", value::string(merge_kind_name(p->source.merge.kind)));
    value::array_t pk;
    for (const auto& k : p->source.merge.primary_key)
      pk.push_back(value::string(k));
    mg.emplace("primary_key", value::array(std::move(pk)));
    m.emplace("merge", value::map(std::move(mg)));
    m.emplace("schema", schema_to_value(p->source.schema));
  } else if (const auto* t = std::get_if<set_transform_event>(&e)) {
    m.emplace("engine", engine_version_to_value(t->engine));
    value::array_t ins;
    for (const auto& id : t->inputs) ins.push_back(value::string(id));
    m.emplace("inputs", value::array(std::move(ins)));
    m.emplace("query", value::string(t->query));
  } else if (const auto* a = std::get_if<add_data_event>(&e)) {
    m.emplace("output_slice", a->output_slice
                                  ? slice_ref_to_value(*a->output_slice)
                                  : value::null());
    m.emplace("output_watermark", a->output_watermark
                                      ? value::time_ms(*a->output_watermark)
                                      : value::null());
    m.emplace("source_fingerprint", value::string(a->source_fingerprint));
  } else if (const auto* x = std::get_if<execute_transform_event>(&e)) {
    value::array_t slices;
    for (const auto& in : x->input_slices) {
      value::map_t sm;
      sm.emplace("block_end", value::integer(static_cast<int64_t>(in.block_end)));
      sm.emplace("dataset_id", value::string(in.dataset_id));
      sm.emplace("offset_end", value::integer(static_cast<int64_t>(in.offset_end)));
      sm.emplace("offset_start",
                 value::integer(static_cast<int64_t>(in.offset_start)));
      slices.push_back(value::map(std::move(sm)));
    }
    m.emplace("input_slices", value::array(std::move(slices)));
    m.emplace("late_records_ignored", value::integer(x->late_records_ignored));
    m.emplace("new_checkpoint", x->new_checkpoint
                                    ? value::string(*x->new_checkpoint)
                                    : value::null());
    m.emplace("output_slice", x->output_slice
                                  ? slice_ref_to_value(*x->output_slice)
                                  : value::null());
    m.emplace("output_watermark", x->output_watermark
                                      ? value::time_ms(*x->output_watermark)
                                      : value::null());
    m.emplace("prior_checkpoint", x->prior_checkpoint
                                      ? value::string(*x->prior_checkpoint)
                                      : value::null());
  } else if (const auto* w = std::get_if<set_watermark_event>(&e)) {
    m.emplace("new_watermark", value::time_ms(w->new_watermark));
  }
  return value::map(std::move(m));
}

metadata_event event_from_value(const value& v) {
  if (v.kind() != value_kind::map)
    raise(errc::decode_error, "event: expected map");
  const auto& m = v.as_map();
  const auto& kind = want(m, "kind", value_kind::string, "event").as_string();
  if (kind == "Seed") {
    check_field_count(m, 3, "Seed");
    seed_event e;
    auto dk = dataset_kind_from_name(
        want(m, "dataset_kind", value_kind::string, "Seed").as_string());
    if (!dk) raise(errc::decode_error, "Seed: unknown dataset_kind");
    e.kind = *dk;
    e.dataset_name =
        want(m, "dataset_name", value_kind::string, "Seed").as_string();
    if (!is_identifier(e.dataset_name))
      raise(errc::decode_error, "Seed: dataset_name is not an identifier");
    return e;
  }
  if (kind == "SetPollingSource") {
    check_field_count(m, 6, "SetPollingSource");
    set_polling_source_event e;
    e.source.allowed_lateness_ms =
        want(m, "allowed_lateness_ms", value_kind::integer, "SetPollingSource")
            .as_int();
    if (e.source.allowed_lateness_ms < 0)
      raise(errc::decode_error, "SetPollingSource: negative allowed_lateness_ms");
    e.source.event_time_column =
        want(m, "event_time_column", value_kind::string, "SetPollingSource")
            .as_string();
    auto f = source_format_from_name(
        want(m, "format", value_kind::string, "SetPollingSource").as_string());
    if (!f) raise(errc::decode_error, "SetPollingSource: unknown format");
    e.source.format = *f;
    const auto& mg =
        want(m, "merge", value_kind::map, "SetPollingSource").as_map();
    check_field_count(mg, 2, "SetPollingSource.merge");
    auto mk = merge_kind_from_name(
        want(mg, "kind", value_kind::string, "merge").as_string());
    if (!mk) raise(errc::decode_error, "SetPollingSource: unknown merge kind");
    e.source.merge.kind = *mk;
    for (const auto& k :
         want(mg, "primary_key", value_kind::array, "merge").as_array()) {
      if (k.kind() != value_kind::string)
        raise(errc::decode_error, "SetPollingSource: bad primary_key entry");
      e.source.merge.primary_key.push_back(k.as_string());
    }
    e.source.schema = schema_from_value(
        want(m, "schema", value_kind::map, "SetPollingSource"));
    return e;
  }
  if (kind == "SetTransform") {
    check_field_count(m, 4, "SetTransform");
    set_transform_event e;
    e.engine = engine_version_from_value(
        want(m, "engine", value_kind::map, "SetTransform"));
    for (const auto& id :
         want(m, "inputs", value_kind::array, "SetTransform").as_array()) {
      if (id.kind() != value_kind::string || !is_object_hash(id.as_string()))
        raise(errc::decode_error, "SetTransform: bad input id");
      e.inputs.push_back(id.as_string());
    }
    if (e.inputs.empty())
      raise(errc::decode_error, "SetTransform: no inputs");
    e.query = want(m, "query", value_kind::string, "SetTransform").as_string();
    return e;
  }
  if (kind == "AddData") {
    check_field_count(m, 4, "AddData");
    add_data_event e;
    if (auto s = want_opt(m, "output_slice", value_kind::map, "AddData"))
      e.output_slice = slice_ref_from_value(*s);
    if (auto w = want_opt(m, "output_watermark", value_kind::time, "AddData"))
      e.output_watermark = w->as_time().ms;
    e.source_fingerprint = want_hash(m, "source_fingerprint", "AddData");
    return e;
  }
  if (kind == "ExecuteTransform") {
    check_field_count(m, 7, "ExecuteTransform");
    execute_transform_event e;
    for (const auto& sv :
         want(m, "input_slices", value_kind::array, "ExecuteTransform").as_array()) {
      if (sv.kind() != value_kind::map)
        raise(errc::decode_error, "ExecuteTransform: bad input slice");
      const auto& sm = sv.as_map();
      check_field_count(sm, 4, "ExecuteTransform.input_slices");
      input_slice in;
      in.block_end = want_offset(sm, "block_end", "input slice");
      in.dataset_id = want_hash(sm, "dataset_id", "input slice");
      in.offset_end = want_offset(sm, "offset_end", "input slice");
      in.offset_start = want_offset(sm, "offset_start", "input slice");
      if (in.offset_end < in.offset_start)
        raise(errc::decode_error, "ExecuteTransform: negative input interval");
      if (in.block_end == 0)
        raise(errc::decode_error,
              "ExecuteTransform: input block prefix cannot be empty");
      e.input_slices.push_back(in);
    }
    if (e.input_slices.empty())
      raise(errc::decode_error, "ExecuteTransform: no input slices");
    e.late_records_ignored =
        want(m, "late_records_ignored", value_kind::integer, "ExecuteTransform")
            .as_int();
    if (e.late_records_ignored < 0)
      raise(errc::decode_error, "ExecuteTransform: negative late count");
    if (auto h = want_opt(m, "new_checkpoint", value_kind::string,
                          "ExecuteTransform")) {
      if (!is_object_hash(h->as_string()))
        raise(errc::decode_error, "ExecuteTransform: malformed new_checkpoint");
      e.new_checkpoint = h->as_string();
    }
    if (auto s = want_opt(m, "output_slice", value_kind::map, "ExecuteTransform"))
      e.output_slice = slice_ref_from_value(*s);
    if (auto w = want_opt(m, "output_watermark", value_kind::time,
                          "ExecuteTransform"))
      e.output_watermark = w->as_time().ms;
    if (auto h = want_opt(m, "prior_checkpoint", value_kind::string,
                          "ExecuteTransform")) {
      if (!is_object_hash(h->as_string()))
        raise(errc::decode_error, "ExecuteTransform: malformed prior_checkpoint");
      e.prior_checkpoint = h->as_string();
    }
    return e;
  }
  if (kind == "SetWatermark") {
    check_field_count(m, 2, "SetWatermark");
    set_watermark_event e;
    e.new_watermark =
        want(m, "new_watermark", value_kind::time, "SetWatermark").as_time().ms;
    return e;
  }
  raise(errc::decode_error, "event: unknown kind '" + kind + "'");
}

std::optional<int64_t> event_watermark(const metadata_event& e) {
  if (const auto* a = std::get_if<add_data_event>(&e)) return a->output_watermark;
  if (const auto* x = std::get_if<execute_transform_event>(&e))
    return x->output_watermark;
  if (const auto* w = std::get_if<set_watermark_event>(&e))
    return w->new_watermark;
  return std::nullopt;
}

const slice_ref* event_output_slice(const metadata_event& e) {
  if (const auto* a = std::get_if<add_data_event>(&e))
    return a->output_slice ? &*a->output_slice : nullptr;
  if (const auto* x = std::get_if<execute_transform_event>(&e))
    return x->output_slice ? &*x->output_slice : nullptr;
  return nullptr;
}

value block_to_value(const metadata_block& b) {
  value::map_t m;
  m.emplace("event", event_to_value(b.event));
  m.emplace("prev_block_hash", value::string(b.prev_block_hash));
  m.emplace("sequence_number",
            value::integer(static_cast<int64_t>(b.sequence_number)));
  m.emplace("system_time", value::time_ms(b.system_time));
  return value::map(std::move(m));
}

metadata_block block_from_value(const value& v) {
  if (v.kind() != value_kind::map)
    raise(errc::decode_error, "block: expected map");
  const auto& m = v.as_map();
  check_field_count(m, 4, "block");
  metadata_block b;
  b.event = event_from_value(want(m, "event", value_kind::map, "block"));
  b.prev_block_hash =
      want(m, "prev_block_hash", value_kind::string, "block").as_string();
  if (!is_object_hash(b.prev_block_hash) && b.prev_block_hash != k_null_hash)
    raise(errc::decode_error, "block: malformed prev_block_hash");
  b.sequence_number = want_offset(m, "sequence_number", "block");
  b.system_time = want(m, "system_time", value_kind::time, "block").as_time().ms;
  return b;
}

std::string block_bytes(const metadata_block& b) {
  return canonical_encode(block_to_value(b));
}

object_hash hash_block(const metadata_block& b) {
  return sha256_hex(block_bytes(b));
}

}  // namespace odf
