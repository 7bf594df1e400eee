#include "core/dataset_io.hpp"

#include "core/errors.hpp"

namespace odf {

std::vector<source_era> source_eras(const loaded_chain& chain) {
  std::vector<source_era> out;
  for (size_t i = 0; i < chain.blocks.size(); ++i)
    if (const auto* e =
            std::get_if<set_polling_source_event>(&chain.blocks[i].block.event))
      out.push_back({i, &e->source});
  return out;
}

namespace {

void check_range(const loaded_chain& chain, uint64_t lo, uint64_t hi) {
  if (lo > hi) raise(errc::offset_not_found, "inverted offset range");
  if (hi > chain.record_count())
    raise(errc::offset_not_found,
          "offset " + std::to_string(hi) + " beyond record count " +
              std::to_string(chain.record_count()));
}

template <class ReadSlice>
std::vector<record> collect(const loaded_chain& chain, uint64_t lo,
                            uint64_t hi, ReadSlice read_one) {
  std::vector<record> out;
  for (size_t i = 0; i < chain.blocks.size(); ++i) {
    const slice_ref* s = event_output_slice(chain.blocks[i].block.event);
    if (!s || s->offset_end <= lo) continue;
    if (s->offset_start >= hi) break;
    for (record& r : read_one(i, *s))
      if (r.offset >= lo && r.offset < hi) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<record> read_root_records(const object_store& store,
                                      const loaded_chain& chain,
                                      uint64_t offset_start,
                                      uint64_t offset_end) {
  check_range(chain, offset_start, offset_end);
  const set_polling_source_event* cur = chain.current_source();
  if (!cur) raise(errc::invalid_event_sequence, "root has no source configured");
  const schema_def& full = cur->source.schema;
  bool with_observed = cur->source.merge.kind == merge_kind::snapshot;
  auto eras = source_eras(chain);

  return collect(chain, offset_start, offset_end,
                 [&](size_t block_idx, const slice_ref& s) {
    const polling_source* era = nullptr;
    for (const auto& e : eras)
      if (e.first_block <= block_idx) era = e.source;
    if (!era)
      raise(errc::invalid_event_sequence, "data block precedes any source");
    std::vector<record> recs = read_slice(store, s, era->schema, with_observed);
    for (record& r : recs)
      for (const column_def& col : full.columns)
        if (!r.payload.count(col.name))
          r.payload.emplace(col.name, value::null());
    return recs;
  });
}

std::vector<record> read_records_generic(const object_store& store,
                                         const loaded_chain& chain,
                                         uint64_t offset_start,
                                         uint64_t offset_end) {
  check_range(chain, offset_start, offset_end);
  return collect(chain, offset_start, offset_end,
                 [&](size_t block_idx, const slice_ref& s) {
    std::string bytes = store.get(s.slice_hash);
    std::vector<record> recs;
    size_t start = 0;
    while (start < bytes.size()) {
      size_t nl = bytes.find('\n', start);
      if (nl == std::string::npos)
        raise(errc::decode_error, "slice: missing trailing newline");
      recs.push_back(record_from_value_generic(canonical_decode(
          std::string_view(bytes).substr(start, nl - start))));
      start = nl + 1;
    }
    if (recs.size() != s.record_count)
      raise(errc::decode_error, "slice: record_count mismatch");
    for (size_t i = 0; i < recs.size(); ++i) {
      if (recs[i].offset != s.offset_start + i)
        raise(errc::decode_error, "slice: offsets do not match ref");
      if (recs[i].system_time != chain.blocks[block_idx].block.system_time)
        raise(errc::decode_error, "slice: system_time differs from block");
    }
    return recs;
  });
}

}  // namespace odf
