#include <algorithm>
#include <string>

#include "core/errors.hpp"
#include "core/util.hpp"
#include "engine/engine.hpp"

namespace odf::engine {

namespace {

using dsl::plan_class;
using dsl::typed_plan;

using wide = __int128;

engine_state fresh_state(const typed_plan& plan) {
  engine_state st;
  st.cls = plan.cls;
  st.input_watermarks.assign(plan.table_names.size(), std::nullopt);
  return st;
}

value::map_t project(const typed_plan& plan, const eval_row& row) {
  value::map_t out;
  for (const dsl::select_col& col : plan.select) {
    out.emplace(col.name, eval_scalar(*col.e, row, plan));
  }
  return out;
}

// ---- windowed ----

value group_key_of(const typed_plan& plan, const value::map_t& payload) {
  value::array_t key;
  for (const dsl::bound_column& col : plan.group_key) {
    const std::string& name =
        plan.input_schemas[col.input].columns[col.column].name;
    auto it = payload.find(name);
    key.push_back(it == payload.end() ? value::null() : it->second);
  }
  return value::array(std::move(key));
}

void insert_window_row(engine_state& st, int64_t start, value key,
                       open_window::member mem) {
  std::string key_bytes = canonical_encode(key);
  auto it = std::lower_bound(
      st.windows.begin(), st.windows.end(), std::make_pair(start, key_bytes),
      [](const open_window& w, const std::pair<int64_t, std::string>& probe) {
        if (w.start != probe.first) return w.start < probe.first;
        return canonical_encode(w.key) < probe.second;
      });
  if (it == st.windows.end() || it->start != start ||
      canonical_encode(it->key) != key_bytes) {
    open_window w;
    w.start = start;
    w.key = std::move(key);
    it = st.windows.insert(it, std::move(w));
  }
  it->rows.push_back(std::move(mem));
}

void run_windowed(const typed_plan& plan, const transform_request& req,
                  engine_state& st, transform_response& resp,
                  trace_sink* sink) {
  const std::optional<int64_t> wm_start = st.input_watermarks[0];
  for (const record& r : req.inputs[0].records) {
    if (wm_start && r.event_time < *wm_start) {
      resp.late_records_ignored++;
      continue;
    }
    eval_row row;
    row.input[0] = &r.payload;
    if (plan.where && !eval_predicate(*plan.where, row, plan)) continue;
    int64_t start = floor_div(r.event_time, plan.window_ms) * plan.window_ms;
    open_window::member mem{static_cast<int64_t>(r.offset), r.event_time,
                            r.payload};
    insert_window_row(st, start, group_key_of(plan, r.payload),
                      std::move(mem));
  }

  if (req.inputs[0].watermark) st.input_watermarks[0] = req.inputs[0].watermark;

  if (st.input_watermarks[0]) {
    int64_t wm = *st.input_watermarks[0];
    auto it = st.windows.begin();
    while (it != st.windows.end()) {
      // closes once the watermark reaches the window end
      if (static_cast<wide>(it->start) + plan.window_ms > wm) {
        ++it;
        continue;
      }
      output_row out;
      out.event_time = std::max(it->start, k_timestamp_min_ms);
      for (const dsl::select_col& col : plan.select) {
        out.payload.emplace(col.name, eval_windowed(*col.e, it->rows, plan));
      }
      if (sink) {
        std::vector<std::pair<size_t, int64_t>> sources;
        sources.reserve(it->rows.size());
        for (const open_window::member& m : it->rows)
          sources.emplace_back(0, m.offset);
        sink->row(out, sources);
      }
      resp.rows.push_back(std::move(out));
      it = st.windows.erase(it);
    }
  }
}

// ---- joined ----

bool keys_match(const typed_plan& plan, const value::map_t& left,
                const value::map_t& right) {
  for (const auto& [lc, rc] : plan.join_keys) {
    const std::string& ln = plan.input_schemas[0].columns[lc.column].name;
    const std::string& rn = plan.input_schemas[1].columns[rc.column].name;
    auto li = left.find(ln);
    auto ri = right.find(rn);
    if (li == left.end() || ri == right.end()) return false;
    const value& lv = li->second;
    const value& rv = ri->second;
    // null keys never match anything
    if (lv.kind() == value_kind::null || rv.kind() == value_kind::null)
      return false;
    if (lv.kind() == rv.kind()) {
      if (!(lv == rv)) return false;
    } else {
      // int/float key pair: exact numeric comparison
      long double x = lv.kind() == value_kind::integer
                          ? static_cast<long double>(lv.as_int())
                          : static_cast<long double>(lv.as_float());
      long double y = rv.kind() == value_kind::integer
                          ? static_cast<long double>(rv.as_int())
                          : static_cast<long double>(rv.as_float());
      if (x != y) return false;
    }
  }
  return true;
}

bool in_range(int64_t left_time, int64_t right_time, int64_t upper_ms) {
  return right_time >= left_time &&
         static_cast<wide>(right_time) <=
             static_cast<wide>(left_time) + upper_ms;
}

void run_joined(const typed_plan& plan, const transform_request& req,
                engine_state& st, transform_response& resp,
                trace_sink* sink) {
  const std::optional<int64_t> wml_start = st.input_watermarks[0];
  const std::optional<int64_t> wmr_start = st.input_watermarks[1];

  for (const record& r : req.inputs[0].records) {
    if (wml_start && r.event_time < *wml_start) {
      resp.late_records_ignored++;
      continue;
    }
    left_entry e{static_cast<int64_t>(r.offset), r.event_time, r.payload,
                 false};
    for (const right_entry& re : st.rights) {
      if (in_range(e.time, re.time, plan.join_upper_ms) &&
          keys_match(plan, e.payload, re.payload)) {
        e.matched = true;
        break;
      }
    }
    st.lefts.push_back(std::move(e));
  }
  for (const record& r : req.inputs[1].records) {
    if (wmr_start && r.event_time < *wmr_start) {
      resp.late_records_ignored++;
      continue;
    }
    right_entry e{static_cast<int64_t>(r.offset), r.event_time, r.payload};
    for (left_entry& le : st.lefts) {
      if (!le.matched && in_range(le.time, e.time, plan.join_upper_ms) &&
          keys_match(plan, le.payload, e.payload)) {
        le.matched = true;
      }
    }
    st.rights.push_back(std::move(e));
  }

  if (req.inputs[0].watermark) st.input_watermarks[0] = req.inputs[0].watermark;
  if (req.inputs[1].watermark) st.input_watermarks[1] = req.inputs[1].watermark;

  if (st.input_watermarks[1]) {
    int64_t wmr = *st.input_watermarks[1];

    // A left at time t resolves once the right watermark exceeds t + upper:
    // every matchable right is then either buffered or provably late.
    std::vector<left_entry> resolved;
    {
      std::vector<left_entry> keep;
      for (left_entry& le : st.lefts) {
        if (static_cast<wide>(le.time) + plan.join_upper_ms <
            static_cast<wide>(wmr)) {
          resolved.push_back(std::move(le));
        } else {
          keep.push_back(std::move(le));
        }
      }
      st.lefts = std::move(keep);
    }
    // Emission order must not depend on how the stream was sliced, so order
    // by resolution time (the left event time), then offsets.
    std::stable_sort(resolved.begin(), resolved.end(),
                     [](const left_entry& a, const left_entry& b) {
                       return a.time < b.time;
                     });

    for (const left_entry& le : resolved) {
      bool any = false;
      for (const right_entry& re : st.rights) {
        if (!in_range(le.time, re.time, plan.join_upper_ms)) continue;
        if (!keys_match(plan, le.payload, re.payload)) continue;
        any = true;
        eval_row row;
        row.input[0] = &le.payload;
        row.input[1] = &re.payload;
        if (plan.where && !eval_predicate(*plan.where, row, plan)) continue;
        output_row out{le.time, project(plan, row)};
        if (sink) sink->row(out, {{0, le.offset}, {1, re.offset}});
        resp.rows.push_back(std::move(out));
      }
      if (!any && plan.join_left_outer) {
        eval_row row;
        row.input[0] = &le.payload;
        if (plan.where && !eval_predicate(*plan.where, row, plan)) continue;
        output_row out{le.time, project(plan, row)};
        if (sink) sink->row(out, {{0, le.offset}});
        resp.rows.push_back(std::move(out));
      }
    }

    // Drop rights that can no longer match: past lefts are resolved, future
    // lefts arrive at or above the left watermark, buffered lefts checked
    // directly.
    if (st.input_watermarks[0]) {
      int64_t wml = *st.input_watermarks[0];
      std::vector<right_entry> keep;
      for (right_entry& re : st.rights) {
        bool future_possible = re.time >= wml;
        bool buffered_possible = false;
        for (const left_entry& le : st.lefts) {
          if (in_range(le.time, re.time, plan.join_upper_ms) &&
              keys_match(plan, le.payload, re.payload)) {
            buffered_possible = true;
            break;
          }
        }
        if (future_possible || buffered_possible)
          keep.push_back(std::move(re));
      }
      st.rights = std::move(keep);
    }
  }
}

}  // namespace

std::optional<int64_t> advance_watermark(
    const typed_plan& plan,
    const std::vector<std::optional<int64_t>>& inputs) {
  for (const auto& w : inputs) {
    if (!w) return std::nullopt;
  }
  wide out = 0;
  switch (plan.cls) {
    case plan_class::stateless: {
      out = *inputs[0];
      for (const auto& w : inputs) out = std::min<wide>(out, *w);
      break;
    }
    case plan_class::windowed:
      // last window boundary at or below the input watermark
      out = static_cast<wide>(floor_div(*inputs[0], plan.window_ms)) *
            plan.window_ms;
      break;
    case plan_class::joined:
      out = std::min<wide>(static_cast<wide>(*inputs[0]),
                           static_cast<wide>(*inputs[1]) - plan.join_upper_ms);
      break;
  }
  out = std::max<wide>(out, k_timestamp_min_ms);
  out = std::min<wide>(out, INT64_MAX);
  return static_cast<int64_t>(out);
}

transform_response execute(const transform_request& req, trace_sink* sink) {
  const typed_plan& plan = *req.plan;
  if (req.inputs.size() != plan.table_names.size()) {
    raise(errc::schema_mismatch,
          "request carries " + std::to_string(req.inputs.size()) +
              " inputs but the plan reads " +
              std::to_string(plan.table_names.size()));
  }
  engine_state st =
      req.prior_state ? decode_state(*req.prior_state, plan) : fresh_state(plan);

  for (size_t i = 0; i < req.inputs.size(); i++) {
    const auto& nw = req.inputs[i].watermark;
    const auto& old = st.input_watermarks[i];
    if (nw && old && *nw < *old) {
      raise(errc::watermark_regression,
            "input " + std::to_string(i) + " watermark went backwards");
    }
  }

  transform_response resp;
  switch (plan.cls) {
    case plan_class::stateless: {
      const std::optional<int64_t> wm = st.input_watermarks[0];
      for (const record& r : req.inputs[0].records) {
        if (wm && r.event_time < *wm) {
          resp.late_records_ignored++;
          continue;
        }
        eval_row row;
        row.input[0] = &r.payload;
        if (plan.where && !eval_predicate(*plan.where, row, plan)) continue;
        output_row out{r.event_time, project(plan, row)};
        if (sink) sink->row(out, {{0, static_cast<int64_t>(r.offset)}});
        resp.rows.push_back(std::move(out));
      }
      if (req.inputs[0].watermark)
        st.input_watermarks[0] = req.inputs[0].watermark;
      break;
    }
    case plan_class::windowed:
      run_windowed(plan, req, st, resp, sink);
      break;
    case plan_class::joined:
      run_joined(plan, req, st, resp, sink);
      break;
  }

  st.late_total += resp.late_records_ignored;
  resp.output_watermark = advance_watermark(plan, st.input_watermarks);
  resp.new_state = encode_state(st);
  return resp;
}

}  // namespace odf::engine
