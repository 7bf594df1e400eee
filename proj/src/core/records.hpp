#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "core/object_store.hpp"
#include "core/schema.hpp"
#include "core/value.hpp"

namespace odf {

// Change-capture verbs for snapshot-merge roots.
enum class observed_op : char { append = 'A', retract = 'R', correct = 'C' };

const char* observed_name(observed_op op);  // "A" | "R" | "C"
std::optional<observed_op> observed_from_name(std::string_view s);

// Bitemporal record. offset is dataset-wide and dense; system_time always
// equals the containing block's system_time; event_time may be arbitrarily
// out of order. observed is present exactly on snapshot-merge root datasets.
struct record {
  uint64_t offset = 0;
  int64_t system_time = 0;
  int64_t event_time = 0;
  std::optional<observed_op> observed;
  value::map_t payload;  // exactly the schema's columns, nulls explicit

  bool operator==(const record&) const = default;
};

struct slice_ref {
  object_hash slice_hash;
  uint64_t offset_start = 0;
  uint64_t offset_end = 0;  // exclusive
  int64_t event_time_min = 0;
  int64_t event_time_max = 0;
  uint64_t record_count = 0;

  bool operator==(const slice_ref&) const = default;
};

value slice_ref_to_value(const slice_ref& r);
slice_ref slice_ref_from_value(const value& v);

// Envelope + payload validation against a schema. `with_observed` says
// whether the observed field is required (snapshot roots) or forbidden.
void validate_record(const record& r, const schema_def& schema,
                     bool with_observed);

value record_to_value(const record& r);
record record_from_value(const value& v, const schema_def& schema,
                         bool with_observed);
// Envelope extraction without schema checks; payload is whatever the line
// carried. For readers of datasets whose schema is not at hand.
record record_from_value_generic(const value& v);

// One canonical-encoded record per line, trailing newline, content-addressed.
// Records must be non-empty, offset-dense, and share one system_time.
slice_ref write_slice(object_store& store, const std::vector<record>& records,
                      const schema_def& schema, bool with_observed);

// Same validation and bytes as write_slice, without touching a store; the
// ref names the hash the bytes would be stored under. Replay verification
// compares these bytes against recorded refs.
std::pair<slice_ref, std::string> encode_slice(
    const std::vector<record>& records, const schema_def& schema,
    bool with_observed);

// Verifies ref fields against actual content while reading.
std::vector<record> read_slice(const object_store& store, const slice_ref& ref,
                               const schema_def& schema, bool with_observed);

// Schema-free audit of a stored slice: canonical lines, dense offsets,
// uniform system_time equal to the owning block's, envelope types, and ref
// consistency. Used by chain validation, which has no schema in hand.
void check_slice_envelope(const object_store& store, const slice_ref& ref,
                          int64_t block_system_time);

// (min, max) event_time over records; records must be non-empty.
std::pair<int64_t, int64_t> event_time_range(const std::vector<record>& records);

}  // namespace odf
