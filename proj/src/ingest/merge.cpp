#include "ingest/merge.hpp"

#include "core/errors.hpp"

namespace odf {

std::string primary_key_of(const value::map_t& payload,
                           const std::vector<std::string>& pk) {
  std::vector<value> parts;
  for (const auto& k : pk) {
    auto it = payload.find(k);
    if (it == payload.end() || it->second.is_null())
      raise(errc::schema_violation, "missing primary key value '" + k + "'");
    parts.push_back(it->second);
  }
  return canonical_encode(value::array(std::move(parts)));
}

std::vector<value::map_t> merge_ledger(
    const std::vector<value::map_t>& rows,
    const std::map<std::string, value::map_t>& history,
    const std::vector<std::string>& pk) {
  std::vector<value::map_t> fresh;
  std::map<std::string, const value::map_t*> in_batch;
  for (const auto& row : rows) {
    std::string key = primary_key_of(row, pk);
    if (auto it = in_batch.find(key); it != in_batch.end()) {
      if (*it->second != row)
        raise(errc::duplicate_key_in_batch,
              "two rows with key " + key + " disagree within one batch");
      continue;  // exact duplicate line
    }
    in_batch.emplace(key, &row);
    if (auto it = history.find(key); it != history.end()) {
      if (it->second != row)
        raise(errc::duplicate_key_in_batch,
              "row with key " + key + " changed since it was ingested; "
              "ledger sources may only append");
      continue;  // already recorded
    }
    fresh.push_back(row);
  }
  return fresh;
}

std::vector<snapshot_change> merge_snapshot(
    const std::vector<value::map_t>& rows,
    const std::map<std::string, value::map_t>& state,
    const std::vector<std::string>& pk) {
  std::map<std::string, const value::map_t*> polled;
  for (const auto& row : rows)
    if (!polled.emplace(primary_key_of(row, pk), &row).second)
      raise(errc::duplicate_key_in_snapshot,
            "snapshot lists one key twice");

  // both maps are key-byte ordered; emit one change per key in that order
  std::vector<snapshot_change> out;
  auto p = polled.begin();
  auto s = state.begin();
  while (p != polled.end() || s != state.end()) {
    if (s == state.end() || (p != polled.end() && p->first < s->first)) {
      out.push_back({observed_op::append, *p->second});
      ++p;
    } else if (p == polled.end() || s->first < p->first) {
      out.push_back({observed_op::retract, s->second});
      ++s;
    } else {
      if (*p->second != s->second)
        out.push_back({observed_op::correct, *p->second});
      ++p;
      ++s;
    }
  }
  return out;
}

std::map<std::string, value::map_t> project_state(
    const std::vector<record>& records, const std::vector<std::string>& pk) {
  std::map<std::string, value::map_t> state;
  for (const auto& r : records) {
    if (!r.observed)
      raise(errc::schema_violation, "record without a change-capture verb");
    std::string key = primary_key_of(r.payload, pk);
    switch (*r.observed) {
      case observed_op::append:
        if (!state.emplace(key, r.payload).second)
          raise(errc::invalid_chain,
                "append for a key that is already present at offset " +
                    std::to_string(r.offset));
        break;
      case observed_op::correct: {
        auto it = state.find(key);
        if (it == state.end())
          raise(errc::invalid_chain, "correction for an absent key at offset " +
                                         std::to_string(r.offset));
        it->second = r.payload;
        break;
      }
      case observed_op::retract:
        if (state.erase(key) == 0)
          raise(errc::invalid_chain, "retraction for an absent key at offset " +
                                         std::to_string(r.offset));
        break;
    }
  }
  return state;
}

std::map<std::string, value::map_t> ledger_history(
    const std::vector<record>& records, const std::vector<std::string>& pk) {
  std::map<std::string, value::map_t> out;
  for (const auto& r : records) out.emplace(primary_key_of(r.payload, pk), r.payload);
  return out;
}

}  // namespace odf
