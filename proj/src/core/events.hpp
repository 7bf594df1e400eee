#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "core/records.hpp"
#include "core/schema.hpp"

namespace odf {

enum class dataset_kind { root, derivative };
const char* dataset_kind_name(dataset_kind k);
std::optional<dataset_kind> dataset_kind_from_name(std::string_view s);

enum class source_format { csv, ndjson };
const char* source_format_name(source_format f);
std::optional<source_format> source_format_from_name(std::string_view s);

enum class merge_kind { ledger, snapshot };
const char* merge_kind_name(merge_kind k);
std::optional<merge_kind> merge_kind_from_name(std::string_view s);

struct merge_strategy {
  merge_kind kind = merge_kind::ledger;
  std::vector<std::string> primary_key;
  bool operator==(const merge_strategy&) const = default;
};

struct polling_source {
  source_format format = source_format::csv;
  schema_def schema;
  std::string event_time_column;  // empty iff snapshot merge
  merge_strategy merge;
  int64_t allowed_lateness_ms = 0;
  bool operator==(const polling_source&) const = default;
};

// The coordinator refuses to replay a transform unless the recorded engine
// version is available; the triple is content-hashed for that comparison.
struct engine_version {
  std::string name;
  std::string semantic_version;
  int64_t plan_semantics_revision = 0;
  bool operator==(const engine_version&) const = default;
};

object_hash engine_version_hash(const engine_version& v);
value engine_version_to_value(const engine_version& v);
engine_version engine_version_from_value(const value& v);

// Cross-field rules that go beyond the wire shape: schema validity, primary
// key columns present and non-nullable, event_time_column a non-nullable
// timestamp column for ledger merges and absent for snapshot merges (their
// event time is the observation time).
void validate_polling_source(const polling_source& p);

struct seed_event {
  dataset_kind kind = dataset_kind::root;
  std::string dataset_name;
  bool operator==(const seed_event&) const = default;
};

struct set_polling_source_event {
  polling_source source;
  bool operator==(const set_polling_source_event&) const = default;
};

struct set_transform_event {
  // Bound positionally to the query's distinct table names in first-appearance
  // order (FROM, then JOIN); names stay in the query text, ids survive sync.
  std::vector<object_hash> inputs;
  std::string query;
  engine_version engine;
  bool operator==(const set_transform_event&) const = default;
};

struct add_data_event {
  std::optional<slice_ref> output_slice;
  std::optional<int64_t> output_watermark;
  object_hash source_fingerprint;
  bool operator==(const add_data_event&) const = default;
};

struct input_slice {
  object_hash dataset_id;
  uint64_t offset_start = 0;
  uint64_t offset_end = 0;  // exclusive; empty interval allowed
  // Input chain prefix (block count) visible to this execution. The prefix
  // fixes both the delivered watermark and the read-time schema, so replays
  // need nothing beyond the chains themselves.
  uint64_t block_end = 0;
  bool operator==(const input_slice&) const = default;
};

struct execute_transform_event {
  std::vector<input_slice> input_slices;  // one per transform input, in order
  std::optional<object_hash> prior_checkpoint;
  std::optional<object_hash> new_checkpoint;
  std::optional<slice_ref> output_slice;
  std::optional<int64_t> output_watermark;
  int64_t late_records_ignored = 0;  // this invocation only
  bool operator==(const execute_transform_event&) const = default;
};

struct set_watermark_event {
  int64_t new_watermark = 0;
  bool operator==(const set_watermark_event&) const = default;
};

using metadata_event =
    std::variant<seed_event, set_polling_source_event, set_transform_event,
                 add_data_event, execute_transform_event, set_watermark_event>;

const char* event_kind_name(const metadata_event& e);
value event_to_value(const metadata_event& e);
metadata_event event_from_value(const value& v);

// Watermark asserted by this event, if any.
std::optional<int64_t> event_watermark(const metadata_event& e);
// Output slice attached by this event, if any.
const slice_ref* event_output_slice(const metadata_event& e);

struct metadata_block {
  object_hash prev_block_hash;  // k_null_hash on the seed block
  uint64_t sequence_number = 0;
  int64_t system_time = 0;
  metadata_event event;

  bool operator==(const metadata_block&) const = default;
};

// block_hash = sha256(canonical block bytes); the hash itself is not part of
// the hashed bytes, it is the storage name.
value block_to_value(const metadata_block& b);
metadata_block block_from_value(const value& v);
std::string block_bytes(const metadata_block& b);
object_hash hash_block(const metadata_block& b);

}  // namespace odf
