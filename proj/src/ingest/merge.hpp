#pragma once

#include <map>
#include <vector>

#include "core/records.hpp"

namespace odf {

// Primary key identity: canonical bytes of the key column values in the
// configured order. Total ordering of keys is the byte ordering.
std::string primary_key_of(const value::map_t& payload,
                           const std::vector<std::string>& pk);

// history: full payload by key over everything already in the dataset.
// Returns the rows to append, in file order. Re-polled rows must match
// their historical payload byte for byte (a ledger never rewrites its
// past); duplicate keys within the batch must agree the same way.
std::vector<value::map_t> merge_ledger(
    const std::vector<value::map_t>& rows,
    const std::map<std::string, value::map_t>& history,
    const std::vector<std::string>& pk);

struct snapshot_change {
  observed_op op = observed_op::append;
  value::map_t payload;  // retractions carry the last known payload
  bool operator==(const snapshot_change&) const = default;
};

// Diff of the polled state against the projected previous state, ordered by
// key bytes so a given diff always serializes the same way.
std::vector<snapshot_change> merge_snapshot(
    const std::vector<value::map_t>& rows,
    const std::map<std::string, value::map_t>& state,
    const std::vector<std::string>& pk);

// Folds change-capture records into current state by key. Records must be
// in offset order.
std::map<std::string, value::map_t> project_state(
    const std::vector<record>& records, const std::vector<std::string>& pk);

// Ledger datasets: payload by key for dedup checks.
std::map<std::string, value::map_t> ledger_history(
    const std::vector<record>& records, const std::vector<std::string>& pk);

}  // namespace odf
