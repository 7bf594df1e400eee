#include <string>

#include "core/errors.hpp"
#include "engine/engine.hpp"

// Checkpoint layout, one canonical map per class:
//   {"kind": "...", "input_watermarks": [null|ms ...], "late_total": n, ...}
// plus "windows" for windowed plans and "lefts"/"rights" for joined ones.
// Watermarks and buffered event times are plain int64 milliseconds so the
// +infinity close-out sentinel stays representable.

namespace odf::engine {

namespace {

[[noreturn]] void bad(const std::string& what) {
  raise(errc::malformed_checkpoint, what);
}

int64_t want_int(const value::map_t& m, const char* key) {
  auto it = m.find(key);
  if (it == m.end() || it->second.kind() != value_kind::integer)
    bad(std::string("checkpoint field '") + key + "' must be an integer");
  return it->second.as_int();
}

const value& want(const value::map_t& m, const char* key) {
  auto it = m.find(key);
  if (it == m.end())
    bad(std::string("checkpoint field '") + key + "' is missing");
  return it->second;
}

value::map_t member_to_value(int64_t offset, int64_t time,
                             const value::map_t& payload) {
  value::map_t m;
  m.emplace("offset", value::integer(offset));
  m.emplace("time", value::integer(time));
  m.emplace("row", value::map(payload));
  return m;
}

void decode_member(const value& v, int64_t& offset, int64_t& time,
                   value::map_t& payload, bool* matched) {
  if (v.kind() != value_kind::map) bad("buffer entries must be maps");
  const value::map_t& m = v.as_map();
  size_t expect = matched ? 4 : 3;
  if (m.size() != expect) bad("buffer entry has stray or missing fields");
  offset = want_int(m, "offset");
  time = want_int(m, "time");
  const value& row = want(m, "row");
  if (row.kind() != value_kind::map) bad("buffer entry row must be a map");
  payload = row.as_map();
  if (matched) {
    const value& f = want(m, "matched");
    if (f.kind() != value_kind::boolean)
      bad("buffer entry 'matched' must be a boolean");
    *matched = f.as_bool();
  }
  if (offset < 0) bad("buffer entry offset is negative");
}

}  // namespace

value encode_state(const engine_state& st) {
  value::map_t m;
  m.emplace("kind", value::string(dsl::plan_class_name(st.cls)));
  value::array_t wm;
  for (const auto& w : st.input_watermarks) {
    wm.push_back(w ? value::integer(*w) : value::null());
  }
  m.emplace("input_watermarks", value::array(std::move(wm)));
  m.emplace("late_total", value::integer(st.late_total));
  if (st.cls == dsl::plan_class::windowed) {
    value::array_t windows;
    for (const open_window& w : st.windows) {
      value::map_t wm2;
      wm2.emplace("start", value::integer(w.start));
      wm2.emplace("key", w.key);
      value::array_t rows;
      for (const open_window::member& r : w.rows) {
        rows.push_back(value::map(member_to_value(r.offset, r.time,
                                                  r.payload)));
      }
      wm2.emplace("rows", value::array(std::move(rows)));
      windows.push_back(value::map(std::move(wm2)));
    }
    m.emplace("windows", value::array(std::move(windows)));
  }
  if (st.cls == dsl::plan_class::joined) {
    value::array_t lefts;
    for (const left_entry& e : st.lefts) {
      value::map_t em = member_to_value(e.offset, e.time, e.payload);
      em.emplace("matched", value::boolean(e.matched));
      lefts.push_back(value::map(std::move(em)));
    }
    m.emplace("lefts", value::array(std::move(lefts)));
    value::array_t rights;
    for (const right_entry& e : st.rights) {
      rights.push_back(value::map(member_to_value(e.offset, e.time,
                                                  e.payload)));
    }
    m.emplace("rights", value::array(std::move(rights)));
  }
  return value::map(std::move(m));
}

engine_state decode_state(const value& v, const dsl::typed_plan& plan) {
  if (v.kind() != value_kind::map) bad("checkpoint must be a map");
  const value::map_t& m = v.as_map();

  engine_state st;
  st.cls = plan.cls;
  const value& kind = want(m, "kind");
  if (kind.kind() != value_kind::string ||
      kind.as_string() != dsl::plan_class_name(plan.cls)) {
    bad("checkpoint was taken under a different query shape");
  }
  size_t expect_fields = 3;
  if (plan.cls == dsl::plan_class::windowed) expect_fields = 4;
  if (plan.cls == dsl::plan_class::joined) expect_fields = 5;
  if (m.size() != expect_fields) bad("checkpoint has stray fields");

  const value& wm = want(m, "input_watermarks");
  if (wm.kind() != value_kind::array ||
      wm.as_array().size() != plan.table_names.size()) {
    bad("checkpoint watermark count does not match the plan inputs");
  }
  for (const value& w : wm.as_array()) {
    if (w.kind() == value_kind::null) {
      st.input_watermarks.push_back(std::nullopt);
    } else if (w.kind() == value_kind::integer) {
      st.input_watermarks.push_back(w.as_int());
    } else {
      bad("input watermarks must be null or integer milliseconds");
    }
  }
  st.late_total = want_int(m, "late_total");
  if (st.late_total < 0) bad("late_total is negative");

  if (plan.cls == dsl::plan_class::windowed) {
    const value& windows = want(m, "windows");
    if (windows.kind() != value_kind::array) bad("'windows' must be an array");
    for (const value& wv : windows.as_array()) {
      if (wv.kind() != value_kind::map) bad("window entries must be maps");
      const value::map_t& wmap = wv.as_map();
      if (wmap.size() != 3) bad("window entry has stray or missing fields");
      open_window w;
      w.start = want_int(wmap, "start");
      w.key = want(wmap, "key");
      if (w.key.kind() != value_kind::array ||
          w.key.as_array().size() != plan.group_key.size()) {
        bad("window group key does not match the plan");
      }
      const value& rows = want(wmap, "rows");
      if (rows.kind() != value_kind::array || rows.as_array().empty())
        bad("windows must hold at least one row");
      int64_t prev_offset = -1;
      for (const value& rv : rows.as_array()) {
        open_window::member mem;
        decode_member(rv, mem.offset, mem.time, mem.payload, nullptr);
        if (mem.offset <= prev_offset)
          bad("window rows must be in ascending offset order");
        prev_offset = mem.offset;
        w.rows.push_back(std::move(mem));
      }
      st.windows.push_back(std::move(w));
    }
    for (size_t i = 1; i < st.windows.size(); i++) {
      const open_window& a = st.windows[i - 1];
      const open_window& b = st.windows[i];
      bool ordered = a.start < b.start ||
                     (a.start == b.start &&
                      canonical_encode(a.key) < canonical_encode(b.key));
      if (!ordered) bad("windows must be sorted by start and group key");
    }
  }

  if (plan.cls == dsl::plan_class::joined) {
    const value& lefts = want(m, "lefts");
    if (lefts.kind() != value_kind::array) bad("'lefts' must be an array");
    int64_t prev = -1;
    for (const value& lv : lefts.as_array()) {
      left_entry e;
      decode_member(lv, e.offset, e.time, e.payload, &e.matched);
      if (e.offset <= prev) bad("left buffer must be in offset order");
      prev = e.offset;
      st.lefts.push_back(std::move(e));
    }
    const value& rights = want(m, "rights");
    if (rights.kind() != value_kind::array) bad("'rights' must be an array");
    prev = -1;
    for (const value& rv : rights.as_array()) {
      right_entry e;
      decode_member(rv, e.offset, e.time, e.payload, nullptr);
      if (e.offset <= prev) bad("right buffer must be in offset order");
      prev = e.offset;
      st.rights.push_back(std::move(e));
    }
  }

  return st;
}

const engine_version& builtin_engine_version() {
  static const engine_version v{"mill", "1.0.0", 1};
  return v;
}

bool engine_available(const engine_version& v) {
  return v == builtin_engine_version();
}

}  // namespace odf::engine
