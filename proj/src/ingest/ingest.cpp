#include "ingest/ingest.hpp"

#include <algorithm>

#include "core/dataset_io.hpp"
#include "core/errors.hpp"
#include "ingest/merge.hpp"
#include "ingest/source.hpp"

namespace odf {

namespace {

// The fingerprint only short-circuits while the source configuration is
// unchanged; a new SetPollingSource makes the same bytes parse differently.
bool same_as_last_poll(const loaded_chain& chain, const object_hash& fp) {
  for (auto it = chain.blocks.rbegin(); it != chain.blocks.rend(); ++it) {
    if (std::holds_alternative<set_polling_source_event>(it->block.event))
      return false;
    if (const auto* a = std::get_if<add_data_event>(&it->block.event))
      return a->source_fingerprint == fp;
  }
  return false;
}

}  // namespace

ingest_outcome ingest_round(object_store& store, const loaded_chain& chain,
                            std::string_view source_bytes,
                            int64_t system_time) {
  if (chain.kind() != dataset_kind::root)
    raise(errc::illegal_operation_for_kind,
          "only root datasets ingest source data");
  const set_polling_source_event* cur = chain.current_source();
  if (!cur)
    raise(errc::invalid_event_sequence, "no source configured; set one first");
  const polling_source& src = cur->source;

  ingest_outcome out;
  out.watermark = chain.watermark();

  object_hash fp = sha256_hex(source_bytes);
  if (same_as_last_poll(chain, fp)) {
    out.unchanged = true;
    return out;
  }

  std::vector<value::map_t> rows = parse_source(source_bytes, src);
  std::vector<record> history =
      read_root_records(store, chain, 0, chain.record_count());

  uint64_t next_offset = chain.record_count();
  std::vector<record> appended;
  auto push = [&](value::map_t payload, int64_t event_time,
                  std::optional<observed_op> op) {
    record r;
    r.offset = next_offset++;
    r.system_time = system_time;
    r.event_time = event_time;
    r.observed = op;
    r.payload = std::move(payload);
    appended.push_back(std::move(r));
  };

  if (src.merge.kind == merge_kind::ledger) {
    auto fresh = merge_ledger(rows, ledger_history(history, src.merge.primary_key),
                              src.merge.primary_key);
    for (auto& row : fresh) {
      int64_t et = row.at(src.event_time_column).as_time().ms;
      push(std::move(row), et, std::nullopt);
    }
  } else {
    auto changes = merge_snapshot(rows, project_state(history, src.merge.primary_key),
                                  src.merge.primary_key);
    // snapshot rows have no event time of their own; observation time is it
    for (auto& ch : changes)
      push(std::move(ch.payload), system_time, ch.op);
  }

  add_data_event ev;
  ev.source_fingerprint = fp;
  if (!appended.empty()) {
    ev.output_slice = write_slice(store, appended, src.schema,
                                  src.merge.kind == merge_kind::snapshot);
    int64_t max_et = event_time_range(appended).second;
    // lateness holds the watermark back; it can never exceed what was seen
    int64_t cand = max_et < k_timestamp_min_ms + src.allowed_lateness_ms
                       ? k_timestamp_min_ms
                       : max_et - src.allowed_lateness_ms;
    if (!out.watermark || cand > *out.watermark) {
      out.watermark = cand;
      ev.output_watermark = cand;
    }
  }

  metadata_block b = make_next_block(&chain, std::move(ev), system_time);
  out.new_head = store_block(store, b);
  out.records_appended = appended.size();
  return out;
}

}  // namespace odf
