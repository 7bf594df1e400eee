#include "core/chain.hpp"

#include <algorithm>

#include "core/errors.hpp"

namespace odf {

namespace {

// Incremental structural check, fed blocks oldest first. Shared by append,
// load and audit so there is exactly one definition of a well-formed chain.
struct chain_scan {
  bool have_seed = false;
  dataset_kind kind = dataset_kind::root;
  object_hash dataset_id;  // seed block hash, known once fed
  uint64_t next_seq = 0;
  int64_t last_system_time = 0;
  std::optional<int64_t> watermark;
  uint64_t next_offset = 0;

  const polling_source* source = nullptr;          // roots
  const set_transform_event* transform = nullptr;  // derivatives
  // Per-input read cursors of the last ExecuteTransform, positionally
  // aligned with transform->inputs. Cleared when the input set changes;
  // execution must then restart from offset 0 with no prior checkpoint.
  std::vector<uint64_t> cursor_ends;
  std::vector<uint64_t> cursor_blocks;
  std::optional<object_hash> last_checkpoint;
  bool era_boundary = false;  // a SetTransform with no execution yet

  void step(const metadata_block& b, const object_hash& block_hash) {
    if (!have_seed) {
      if (b.sequence_number != 0)
        raise(errc::invalid_block, "first block must have sequence_number 0");
      if (b.prev_block_hash != k_null_hash)
        raise(errc::invalid_block, "seed block must not have a predecessor");
      if (!std::holds_alternative<seed_event>(b.event))
        raise(errc::invalid_event_sequence, "chain must begin with a Seed event");
    } else {
      if (b.sequence_number != next_seq)
        raise(errc::invalid_block,
              "expected sequence_number " + std::to_string(next_seq) +
                  ", got " + std::to_string(b.sequence_number));
      if (b.system_time < last_system_time)
        raise(errc::system_time_regression,
              "system_time moves backwards at block " +
                  std::to_string(b.sequence_number));
      if (std::holds_alternative<seed_event>(b.event))
        raise(errc::invalid_event_sequence, "Seed only allowed at the start");
    }

    if (const auto* e = std::get_if<seed_event>(&b.event)) {
      on_seed(*e);
    } else if (const auto* sps = std::get_if<set_polling_source_event>(&b.event)) {
      on_source(*sps);
    } else if (const auto* st = std::get_if<set_transform_event>(&b.event)) {
      on_transform(*st);
    } else if (const auto* ad = std::get_if<add_data_event>(&b.event)) {
      on_add_data(*ad);
    } else if (const auto* et = std::get_if<execute_transform_event>(&b.event)) {
      on_execute(*et);
    } else {
      on_watermark(std::get<set_watermark_event>(b.event));
    }

    if (!have_seed) {
      have_seed = true;
      dataset_id = block_hash;
    }
    next_seq = b.sequence_number + 1;
    last_system_time = b.system_time;
  }

 private:
  void require_kind(dataset_kind k, const char* ev) {
    if (kind != k)
      raise(errc::illegal_event_for_kind,
            std::string(ev) + " is not valid on a " +
                dataset_kind_name(kind) + " dataset");
  }

  void check_watermark_advance(const std::optional<int64_t>& w) {
    if (!w) return;  // null assertion leaves the watermark untouched
    if (watermark && *w < *watermark)
      raise(errc::watermark_regression,
            "watermark would move backwards");
    watermark = *w;
  }

  void check_slice(const std::optional<slice_ref>& s) {
    if (!s) return;
    if (s->offset_start != next_offset)
      raise(errc::offset_gap, "slice starts at offset " +
                                  std::to_string(s->offset_start) +
                                  ", expected " + std::to_string(next_offset));
    next_offset = s->offset_end;
  }

  void on_seed(const seed_event& e) { kind = e.kind; }

  void on_source(const set_polling_source_event& e) {
    require_kind(dataset_kind::root, "SetPollingSource");
    validate_polling_source(e.source);
    // Changing the schema under existing records is only allowed when old
    // slices remain readable: new columns must be nullable additions. The
    // merge kind is frozen too, since it decides whether stored records
    // carry change-capture verbs.
    if (source && next_offset > 0) {
      if (!is_nullable_extension(source->schema, e.source.schema))
        raise(errc::schema_mismatch,
              "schema change is not a nullable extension of the previous schema");
      if (source->merge.kind != e.source.merge.kind)
        raise(errc::schema_mismatch,
              "merge kind cannot change once records exist");
    }
    source = &e.source;
  }

  void on_transform(const set_transform_event& e) {
    require_kind(dataset_kind::derivative, "SetTransform");
    for (const auto& id : e.inputs)
      if (id == dataset_id)
        raise(errc::cycle_detected, "dataset cannot read from itself");
    bool same_inputs = transform && transform->inputs == e.inputs;
    if (!same_inputs) {
      cursor_ends.clear();
      cursor_blocks.clear();
      last_checkpoint.reset();
    }
    transform = &e;
    era_boundary = true;
  }

  void on_add_data(const add_data_event& e) {
    require_kind(dataset_kind::root, "AddData");
    if (!source)
      raise(errc::invalid_event_sequence,
            "AddData before any SetPollingSource");
    check_slice(e.output_slice);
    check_watermark_advance(e.output_watermark);
  }

  void on_execute(const execute_transform_event& e) {
    require_kind(dataset_kind::derivative, "ExecuteTransform");
    if (!transform)
      raise(errc::invalid_event_sequence,
            "ExecuteTransform before any SetTransform");
    if (e.input_slices.size() != transform->inputs.size())
      raise(errc::invalid_block,
            "input slice count does not match the transform's input count");
    for (size_t i = 0; i < e.input_slices.size(); ++i) {
      if (e.input_slices[i].dataset_id != transform->inputs[i])
        raise(errc::invalid_block,
              "input slice " + std::to_string(i) +
                  " names the wrong input dataset");
      if (e.input_slices[i].block_end == 0)
        raise(errc::invalid_block,
              "input slice " + std::to_string(i) + " has an empty block prefix");
    }

    bool starts_at_zero = true;
    for (const auto& s : e.input_slices)
      if (s.offset_start != 0) starts_at_zero = false;
    bool continues = !cursor_ends.empty();
    if (continues)
      for (size_t i = 0; i < e.input_slices.size(); ++i)
        if (e.input_slices[i].offset_start != cursor_ends[i]) continues = false;

    if (continues && e.prior_checkpoint == last_checkpoint) {
      // carried state across consecutive executions (possibly across a
      // compatible SetTransform); input views may not shrink, which also
      // keeps delivered watermarks monotone (prefix watermark never regresses)
      for (size_t i = 0; i < e.input_slices.size(); ++i)
        if (e.input_slices[i].block_end < cursor_blocks[i])
          raise(errc::invalid_block,
                "input " + std::to_string(i) +
                    " block prefix shrinks across executions");
    } else if (starts_at_zero && !e.prior_checkpoint &&
               (era_boundary || cursor_ends.empty())) {
      // reset: reprocess inputs from scratch
    } else {
      raise(errc::invalid_block,
            "execution neither continues the previous cursors/checkpoint nor "
            "restarts cleanly after a transform change");
    }

    cursor_ends.clear();
    cursor_blocks.clear();
    for (const auto& s : e.input_slices) {
      cursor_ends.push_back(s.offset_end);
      cursor_blocks.push_back(s.block_end);
    }
    last_checkpoint = e.new_checkpoint;
    era_boundary = false;
    check_slice(e.output_slice);
    check_watermark_advance(e.output_watermark);
  }

  void on_watermark(const set_watermark_event& e) {
    require_kind(dataset_kind::root, "SetWatermark");
    check_watermark_advance(e.new_watermark);
  }
};

}  // namespace

std::optional<int64_t> loaded_chain::watermark() const {
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it)
    if (auto w = event_watermark(it->block.event)) return w;
  return std::nullopt;
}

std::optional<int64_t> loaded_chain::watermark_system_time() const {
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it)
    if (event_watermark(it->block.event)) return it->block.system_time;
  return std::nullopt;
}

uint64_t loaded_chain::record_count() const {
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it)
    if (const slice_ref* s = event_output_slice(it->block.event))
      return s->offset_end;
  return 0;
}

const set_polling_source_event* loaded_chain::current_source() const {
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it)
    if (const auto* e = std::get_if<set_polling_source_event>(&it->block.event))
      return e;
  return nullptr;
}

const set_transform_event* loaded_chain::current_transform() const {
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it)
    if (const auto* e = std::get_if<set_transform_event>(&it->block.event))
      return e;
  return nullptr;
}

size_t loaded_chain::blocks_as_of(int64_t t) const {
  size_t n = 0;
  while (n < blocks.size() && blocks[n].block.system_time <= t) ++n;
  return n;
}

namespace {

// Walk prev links newest -> oldest. The store verifies each block's bytes
// against its name, which transitively authenticates every prev link.
std::vector<loaded_block> walk(const object_store& store,
                               const object_hash& head) {
  std::vector<loaded_block> rev;
  object_hash at = head;
  std::optional<uint64_t> expect_seq;
  while (at != k_null_hash) {
    metadata_block b = block_from_value(canonical_decode(store.get(at)));
    if (expect_seq && b.sequence_number != *expect_seq)
      raise(errc::invalid_block,
            "block " + at + " has sequence_number " +
                std::to_string(b.sequence_number) + ", expected " +
                std::to_string(*expect_seq));
    if (!expect_seq && b.sequence_number > 1u << 22)
      raise(errc::invalid_block, "implausible head sequence_number");
    expect_seq = b.sequence_number == 0
                     ? std::optional<uint64_t>()
                     : std::optional<uint64_t>(b.sequence_number - 1);
    object_hash prev = b.prev_block_hash;
    rev.push_back({std::move(b), at});
    if (rev.back().block.sequence_number == 0 && prev != k_null_hash)
      raise(errc::invalid_block, "sequence_number 0 with a predecessor");
    if (rev.back().block.sequence_number != 0 && prev == k_null_hash)
      raise(errc::invalid_block, "missing predecessor before sequence 0");
    at = prev;
  }
  if (rev.empty()) raise(errc::empty_chain, "no head block");
  std::reverse(rev.begin(), rev.end());
  return rev;
}

}  // namespace

loaded_chain load_chain(const object_store& store, const object_hash& head) {
  loaded_chain chain;
  chain.blocks = walk(store, head);
  chain_scan scan;
  for (const auto& lb : chain.blocks) scan.step(lb.block, lb.hash);
  return chain;
}

metadata_block make_next_block(const loaded_chain* chain, metadata_event e,
                               int64_t system_time) {
  if (system_time < k_timestamp_min_ms || system_time > k_timestamp_max_ms)
    raise(errc::unsupported_value, "system_time outside representable range");
  metadata_block b;
  b.event = std::move(e);
  b.system_time = system_time;
  if (chain) {
    b.prev_block_hash = chain->head();
    b.sequence_number = chain->blocks.back().block.sequence_number + 1;
  } else {
    b.prev_block_hash = k_null_hash;
    b.sequence_number = 0;
  }

  chain_scan scan;
  if (chain)
    for (const auto& lb : chain->blocks) scan.step(lb.block, lb.hash);
  scan.step(b, k_null_hash);  // hash unknown yet; only the seed uses it
  return b;
}

object_hash store_block(object_store& store, const metadata_block& b) {
  return store.put(block_bytes(b));
}

validation_report validate_chain(const object_store& store,
                                 const object_hash& head) {
  validation_report rep;
  auto fail = [&](std::optional<uint64_t> seq, const object_hash& h,
                  std::string what) {
    rep.valid = false;
    rep.failure = chain_finding{seq, h, std::move(what)};
    return rep;
  };

  // Stage 1: walk and decode. A broken link surfaces here; the sequence of
  // the offending block is inferred from its child when the block itself is
  // unreadable.
  std::vector<loaded_block> blocks;
  {
    object_hash at = head;
    std::optional<uint64_t> child_seq;
    std::vector<loaded_block> rev;
    while (at != k_null_hash) {
      object_hash cur = at;
      auto inferred_seq = child_seq ? std::optional<uint64_t>(*child_seq - 1)
                                    : std::nullopt;
      metadata_block b;
      try {
        b = block_from_value(canonical_decode(store.get(cur)));
      } catch (const error& ex) {
        return fail(inferred_seq, cur, ex.what());
      }
      rep.blocks_checked++;
      if (child_seq && b.sequence_number != *child_seq - 1)
        return fail(b.sequence_number, cur, "sequence numbers are not dense");
      if (!child_seq && b.sequence_number > 1u << 22)
        return fail(b.sequence_number, cur, "implausible head sequence_number");
      if (b.sequence_number == 0 && b.prev_block_hash != k_null_hash)
        return fail(0, cur, "sequence_number 0 with a predecessor");
      if (b.sequence_number != 0 && b.prev_block_hash == k_null_hash)
        return fail(b.sequence_number, cur, "missing predecessor before sequence 0");
      child_seq = b.sequence_number;
      at = b.prev_block_hash;
      rev.push_back({std::move(b), std::move(cur)});
    }
    if (rev.empty()) return fail(std::nullopt, head, "no head block");
    std::reverse(rev.begin(), rev.end());
    blocks = std::move(rev);
  }

  // Stage 2: structural scan plus referenced-object audit, oldest first so
  // the reported failure is the earliest corruption.
  chain_scan scan;
  for (const auto& lb : blocks) {
    try {
      scan.step(lb.block, lb.hash);
    } catch (const error& ex) {
      return fail(lb.block.sequence_number, lb.hash, ex.what());
    }
    try {
      if (const slice_ref* s = event_output_slice(lb.block.event)) {
        check_slice_envelope(store, *s, lb.block.system_time);
        rep.objects_checked++;
      }
      if (const auto* et = std::get_if<execute_transform_event>(&lb.block.event)) {
        if (et->new_checkpoint) {
          canonical_decode(store.get(*et->new_checkpoint));
          rep.objects_checked++;
        }
      }
    } catch (const error& ex) {
      return fail(lb.block.sequence_number, lb.hash, ex.what());
    }
  }
  return rep;
}

}  // namespace odf
