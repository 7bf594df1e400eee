#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "core/events.hpp"
#include "core/records.hpp"
#include "core/value.hpp"
#include "dsl/dsl.hpp"

// Deterministic streaming transform runner. One request carries, per input,
// the new records (offset order) plus an optional cumulative watermark
// assertion. Records are judged late against the watermark in force when the
// request starts; the new assertions take effect at the end of the request
// and drive emission. Given the same plan, state and inputs, execute() is
// byte-reproducible.

namespace odf::engine {

struct input_batch {
  std::vector<record> records;
  std::optional<int64_t> watermark;  // cumulative ms; no assertion when unset
};

struct transform_request {
  const dsl::typed_plan* plan = nullptr;
  std::vector<input_batch> inputs;   // positional, aligned with plan inputs
  const value* prior_state = nullptr;  // decoded checkpoint; null on first run
};

struct output_row {
  int64_t event_time = 0;
  value::map_t payload;
};

struct transform_response {
  std::vector<output_row> rows;
  value new_state;
  std::optional<int64_t> output_watermark;
  int64_t late_records_ignored = 0;  // this request only
};

// Receives, per emitted row and in emission order, the (input index, offset)
// coordinates of every input record that contributed to it.
struct trace_sink {
  virtual void row(const output_row& out,
                   const std::vector<std::pair<size_t, int64_t>>& sources) = 0;
  virtual ~trace_sink() = default;
};

transform_response execute(const transform_request& req,
                           trace_sink* sink = nullptr);

// Highest watermark the transform may assert for its output given the
// per-input watermarks: min for stateless, last closed window boundary for
// windowed, min(left, right - upper) for joined. Null while any input has
// not asserted one.
std::optional<int64_t> advance_watermark(
    const dsl::typed_plan& plan,
    const std::vector<std::optional<int64_t>>& inputs);

// Whether a checkpoint taken under prev keeps serving next. Thin veneer over
// the plan-level compatibility rule.
inline bool handle_query_change(const dsl::typed_plan& prev,
                                const dsl::typed_plan& next) {
  return dsl::carry_compatible(prev, next);
}

// ---- checkpoint state ----

struct open_window {
  int64_t start = 0;
  value key;  // array of group column values
  struct member {
    int64_t offset = 0;
    int64_t time = 0;
    value::map_t payload;
  };
  std::vector<member> rows;
};

struct left_entry {
  int64_t offset = 0;
  int64_t time = 0;
  value::map_t payload;
  bool matched = false;
};

struct right_entry {
  int64_t offset = 0;
  int64_t time = 0;
  value::map_t payload;
};

struct engine_state {
  dsl::plan_class cls = dsl::plan_class::stateless;
  std::vector<std::optional<int64_t>> input_watermarks;
  int64_t late_total = 0;
  std::vector<open_window> windows;  // sorted by (start, canonical key bytes)
  std::vector<left_entry> lefts;     // sorted by offset
  std::vector<right_entry> rights;   // sorted by offset
};

value encode_state(const engine_state& st);
// Validates shape and plan fit; throws malformed_checkpoint.
engine_state decode_state(const value& v, const dsl::typed_plan& plan);

// ---- expression evaluation (shared with provenance replay) ----

// Per-input payloads; a null pointer reads every column as null (the
// null-extended side of a left join).
struct eval_row {
  const value::map_t* input[2] = {nullptr, nullptr};
};

// Scalar evaluation. Aggregate nodes are illegal here. Throws eval_error or
// arithmetic_overflow.
value eval_scalar(const dsl::typed_expr& e, const eval_row& row,
                  const dsl::typed_plan& plan);

// Select-item evaluation for a closed window: aggregate nodes fold over the
// member rows, plain columns read the first member (they are group columns,
// constant across the window).
value eval_windowed(const dsl::typed_expr& e,
                    const std::vector<open_window::member>& rows,
                    const dsl::typed_plan& plan);

// True iff the predicate evaluates to non-null true.
bool eval_predicate(const dsl::typed_expr& e, const eval_row& row,
                    const dsl::typed_plan& plan);

// ---- engine registry ----

// The single built-in engine. version_hash of this triple is what
// SetTransform records and what replay demands.
const engine_version& builtin_engine_version();
bool engine_available(const engine_version& v);

}  // namespace odf::engine
