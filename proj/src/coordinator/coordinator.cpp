#include "coordinator/coordinator.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "core/dataset_io.hpp"
#include "core/errors.hpp"
#include "core/hash.hpp"
#include "ingest/ingest.hpp"

namespace odf {

namespace {

std::string display_name(const workspace& ws, const object_hash& id) {
  if (auto n = ws.name_of(id)) return *n;
  return id;
}

std::optional<std::string> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream out;
  out << in.rdbuf();
  if (in.bad()) raise(errc::io_failure, "cannot read " + p.string());
  return std::move(out).str();
}

}  // namespace

// ---- replay ----

void replay_chain(
    workspace& ws, const loaded_chain& chain,
    const std::function<bool(const replay_step&)>& on_step,
    const std::function<engine::trace_sink*(size_t block_index)>& sink_for) {
  const set_transform_event* transform = nullptr;
  value state;
  bool have_state = false;
  uint64_t next_offset = 0;
  std::optional<int64_t> chain_wm;

  for (size_t i = 0; i < chain.size(); i++) {
    const metadata_block& b = chain.blocks[i].block;
    if (const auto* st = std::get_if<set_transform_event>(&b.event)) {
      transform = st;
      continue;
    }
    const auto* et = std::get_if<execute_transform_event>(&b.event);
    if (!et) continue;

    if (!engine::engine_available(transform->engine))
      raise(errc::engine_version_unavailable,
            "block " + std::to_string(b.sequence_number) + " was produced by " +
                transform->engine.name + " " +
                transform->engine.semantic_version +
                ", which this build does not provide");

    // The recorded prefixes pin both the delivered watermarks and the
    // read-time schemas; nothing of the execution depends on later growth.
    std::vector<loaded_chain> prefixes;
    prefixes.reserve(et->input_slices.size());
    for (const auto& sl : et->input_slices) {
      loaded_chain full = ws.chain_of(sl.dataset_id);
      if (sl.block_end > full.size())
        raise(errc::invalid_chain,
              "block " + std::to_string(b.sequence_number) +
                  " records an input prefix longer than the input chain");
      prefixes.push_back(chain_prefix(full, sl.block_end));
    }
    dsl::typed_plan plan = make_plan(ws, *transform, prefixes);

    engine::transform_request req;
    req.plan = &plan;
    for (size_t k = 0; k < et->input_slices.size(); k++) {
      engine::input_batch batch;
      batch.records =
          read_input_records(ws.store(), prefixes[k],
                             et->input_slices[k].offset_start,
                             et->input_slices[k].offset_end);
      batch.watermark = prefixes[k].watermark();
      req.inputs.push_back(std::move(batch));
    }
    // Recorded prior non-null means this execution carried the previous
    // block's state; the replayed state from that block is exactly it.
    req.prior_state =
        (et->prior_checkpoint && have_state) ? &state : nullptr;

    engine::trace_sink* sink = sink_for ? sink_for(i) : nullptr;
    engine::transform_response resp = engine::execute(req, sink);

    replay_step step;
    step.block_index = i;
    step.sequence = b.sequence_number;
    step.recorded = et;
    step.late_ignored = resp.late_records_ignored;
    step.out_records.reserve(resp.rows.size());
    for (size_t r = 0; r < resp.rows.size(); r++) {
      record rec;
      rec.offset = next_offset + r;
      rec.system_time = b.system_time;
      rec.event_time = resp.rows[r].event_time;
      rec.payload = std::move(resp.rows[r].payload);
      step.out_records.push_back(std::move(rec));
    }
    if (!step.out_records.empty()) {
      auto [ref, bytes] =
          encode_slice(step.out_records, plan.output_schema, false);
      step.slice = ref;
      step.slice_bytes = std::move(bytes);
    }
    step.checkpoint_bytes = canonical_encode(resp.new_state);
    step.checkpoint_hash = sha256_hex(step.checkpoint_bytes);
    if (resp.output_watermark &&
        (!chain_wm || *resp.output_watermark > *chain_wm))
      step.wm_assertion = resp.output_watermark;

    state = std::move(resp.new_state);
    have_state = true;
    // Bookkeeping follows the recorded chain, not the replay, so divergence
    // detection stays block-local.
    if (et->output_slice) next_offset = et->output_slice->offset_end;
    if (et->output_watermark) chain_wm = et->output_watermark;

    if (!on_step(step)) return;
  }
}

namespace {

// First difference between a replayed block and its recording, if any.
std::optional<std::string> compare_step(const replay_step& s) {
  const execute_transform_event& et = *s.recorded;
  if (et.output_slice && s.out_records.empty())
    return "replay produced no records where the block has an output slice";
  if (!et.output_slice && !s.out_records.empty())
    return "replay produced records where the block has no output slice";
  if (et.output_slice && !(s.slice == *et.output_slice))
    return "output records differ from the recorded slice";
  if (!et.new_checkpoint)
    return "block records no checkpoint";
  if (s.checkpoint_hash != *et.new_checkpoint)
    return "checkpoint differs from the recorded one";
  if (s.wm_assertion != et.output_watermark)
    return "watermark assertion differs";
  if (s.late_ignored != et.late_records_ignored)
    return "late record count differs";
  return std::nullopt;
}

// Derivative data and checkpoints are a cache over the chain: anything
// missing is recomputed and stored back under its recorded hash.
uint64_t heal_derivative(workspace& ws, const loaded_chain& chain) {
  bool missing = false;
  for (const auto& lb : chain.blocks) {
    const auto* et = std::get_if<execute_transform_event>(&lb.block.event);
    if (!et) continue;
    if (et->output_slice && !ws.store().has(et->output_slice->slice_hash))
      missing = true;
    if (et->new_checkpoint && !ws.store().has(*et->new_checkpoint))
      missing = true;
  }
  if (!missing) return 0;

  uint64_t restored = 0;
  replay_chain(ws, chain, [&](const replay_step& s) {
    if (auto diff = compare_step(s))
      raise(errc::verification_failed,
            "cannot regenerate block " + std::to_string(s.sequence) + ": " +
                *diff);
    const execute_transform_event& et = *s.recorded;
    if (et.output_slice && !ws.store().has(et.output_slice->slice_hash)) {
      ws.store().put_expected(et.output_slice->slice_hash, s.slice_bytes);
      restored++;
    }
    if (et.new_checkpoint && !ws.store().has(*et.new_checkpoint)) {
      ws.store().put_expected(*et.new_checkpoint, s.checkpoint_bytes);
      restored++;
    }
    return true;
  });
  return restored;
}

}  // namespace

// ---- scheduling ----

transform_outcome run_transform(workspace& ws, const object_hash& id,
                                int64_t system_time) {
  file_lock guard = ws.lock_dataset(id);
  loaded_chain chain = ws.chain_of(id);
  if (chain.kind() != dataset_kind::derivative)
    raise(errc::illegal_operation_for_kind,
          "only derivative datasets run transforms");
  const set_transform_event* t = chain.current_transform();
  if (!t)
    raise(errc::invalid_event_sequence, "dataset has no transform configured");
  if (!engine::engine_available(t->engine))
    raise(errc::engine_version_unavailable,
          "transform wants engine " + t->engine.name + " " +
              t->engine.semantic_version +
              ", which this build does not provide");

  // Last execution and the transform that was in force for it.
  const execute_transform_event* last_et = nullptr;
  const set_transform_event* last_et_transform = nullptr;
  const set_transform_event* running = nullptr;
  for (const auto& lb : chain.blocks) {
    if (const auto* st = std::get_if<set_transform_event>(&lb.block.event)) {
      running = st;
    } else if (const auto* et =
                   std::get_if<execute_transform_event>(&lb.block.event)) {
      last_et = et;
      last_et_transform = running;
    }
  }

  std::vector<loaded_chain> inputs;
  inputs.reserve(t->inputs.size());
  for (const auto& in_id : t->inputs) inputs.push_back(ws.chain_of(in_id));
  dsl::typed_plan plan = make_plan(ws, *t, inputs);

  // Carry state across the query change only when the checkpoint still
  // serves the new plan; otherwise reprocess from offset zero.
  bool carry = false;
  if (last_et) {
    if (last_et_transform == t) {
      carry = true;
    } else if (last_et_transform && last_et_transform->inputs == t->inputs) {
      std::vector<loaded_chain> old_prefixes;
      old_prefixes.reserve(inputs.size());
      for (size_t i = 0; i < inputs.size(); i++)
        old_prefixes.push_back(
            chain_prefix(inputs[i], last_et->input_slices[i].block_end));
      dsl::typed_plan old_plan =
          make_plan(ws, *last_et_transform, old_prefixes);
      carry = engine::handle_query_change(old_plan, plan);
    }
  }

  std::vector<uint64_t> cursor(t->inputs.size(), 0);
  std::optional<object_hash> prior_ckpt;
  std::optional<value> prior_state;
  if (carry) {
    for (size_t i = 0; i < t->inputs.size(); i++)
      cursor[i] = last_et->input_slices[i].offset_end;
    prior_ckpt = last_et->new_checkpoint;
    if (prior_ckpt)
      prior_state = canonical_decode(ws.store().get(*prior_ckpt));
  }

  engine::transform_request req;
  req.plan = &plan;
  bool any_new_records = false;
  bool any_wm_change = false;
  for (size_t i = 0; i < inputs.size(); i++) {
    uint64_t end = inputs[i].record_count();
    if (end < cursor[i])
      raise(errc::invalid_chain,
            "input " + display_name(ws, t->inputs[i]) +
                " has fewer records than the last execution consumed");
    engine::input_batch batch;
    batch.records = read_input_records(ws.store(), inputs[i], cursor[i], end);
    batch.watermark = inputs[i].watermark();
    if (!batch.records.empty()) any_new_records = true;
    std::optional<int64_t> prev_wm;
    if (carry)
      prev_wm = chain_prefix(inputs[i], last_et->input_slices[i].block_end)
                    .watermark();
    if (batch.watermark != prev_wm) any_wm_change = true;
    req.inputs.push_back(std::move(batch));
  }
  if (!any_new_records && !any_wm_change) return {};

  req.prior_state = prior_state ? &*prior_state : nullptr;
  engine::transform_response resp = engine::execute(req);

  execute_transform_event et;
  for (size_t i = 0; i < inputs.size(); i++) {
    input_slice sl;
    sl.dataset_id = t->inputs[i];
    sl.offset_start = cursor[i];
    sl.offset_end = inputs[i].record_count();
    sl.block_end = inputs[i].size();
    et.input_slices.push_back(sl);
  }
  et.prior_checkpoint = carry ? prior_ckpt : std::nullopt;

  uint64_t base = chain.record_count();
  std::vector<record> out_records;
  out_records.reserve(resp.rows.size());
  for (size_t r = 0; r < resp.rows.size(); r++) {
    record rec;
    rec.offset = base + r;
    rec.system_time = system_time;
    rec.event_time = resp.rows[r].event_time;
    rec.payload = std::move(resp.rows[r].payload);
    out_records.push_back(std::move(rec));
  }
  if (!out_records.empty())
    et.output_slice =
        write_slice(ws.store(), out_records, plan.output_schema, false);
  et.new_checkpoint = ws.store().put(canonical_encode(resp.new_state));
  std::optional<int64_t> cur_wm = chain.watermark();
  if (resp.output_watermark && (!cur_wm || *resp.output_watermark > *cur_wm))
    et.output_watermark = resp.output_watermark;
  et.late_records_ignored = resp.late_records_ignored;

  metadata_block b = make_next_block(&chain, std::move(et), system_time);
  object_hash head = store_block(ws.store(), b);

  transform_outcome out;
  out.ran = true;
  out.block_hash = head;
  out.records_out = out_records.size();
  out.late_ignored = resp.late_records_ignored;
  out.output_watermark =
      std::get<execute_transform_event>(b.event).output_watermark;
  ws.set_head(id, head);  // last: everything the block references is stored
  return out;
}

ingest_outcome_report ingest_dataset(
    workspace& ws, const object_hash& id,
    const std::optional<std::filesystem::path>& source_override,
    int64_t system_time) {
  file_lock guard = ws.lock_dataset(id);
  loaded_chain chain = ws.chain_of(id);
  if (chain.kind() != dataset_kind::root)
    raise(errc::illegal_operation_for_kind, "only root datasets ingest");
  std::filesystem::path path;
  if (source_override) {
    path = *source_override;
  } else {
    auto sp = ws.source_path(id);
    if (!sp)
      raise(errc::source_missing,
            "dataset has no source path; pass one explicitly");
    path = *sp;
  }
  auto bytes = read_file(path);
  if (!bytes)
    raise(errc::source_missing, "source file not found: " + path.string());
  ingest_outcome o = ingest_round(ws.store(), chain, *bytes, system_time);
  if (o.new_head) ws.set_head(id, *o.new_head);
  return {o.unchanged, o.records_appended, o.watermark};
}

pull_report pull(workspace& ws, const object_hash& target,
                 int64_t system_time) {
  pull_report rep;

  std::vector<object_hash> order;
  std::set<object_hash> done;
  std::set<object_hash> visiting;
  std::function<void(const object_hash&)> visit = [&](const object_hash& d) {
    if (done.count(d)) return;
    if (!visiting.insert(d).second)
      raise(errc::cycle_detected, "dataset graph contains a cycle");
    loaded_chain c = ws.chain_of(d);
    if (const auto* t = c.current_transform())
      for (const auto& in : t->inputs) visit(in);
    visiting.erase(d);
    done.insert(d);
    order.push_back(d);
  };
  visit(target);

  std::set<object_hash> failed;
  for (const auto& d : order) {
    pull_action act;
    act.id = d;
    act.name = display_name(ws, d);
    loaded_chain c = ws.chain_of(d);

    bool blocked = false;
    if (const auto* t = c.current_transform())
      for (const auto& in : t->inputs)
        if (failed.count(in)) blocked = true;
    if (blocked) {
      act.action = "skipped";
      act.detail = "an input failed";
      failed.insert(d);
      rep.ok = false;
      rep.actions.push_back(std::move(act));
      continue;
    }

    try {
      if (c.kind() == dataset_kind::root) {
        if (!ws.source_path(d)) {
          act.action = "up-to-date";
          act.detail = "no polling source configured";
        } else {
          ingest_outcome_report r =
              ingest_dataset(ws, d, std::nullopt, system_time);
          if (r.unchanged) {
            act.action = "up-to-date";
          } else {
            act.action = "ingested";
            act.records = r.records;
          }
        }
      } else {
        uint64_t healed = heal_derivative(ws, c);
        transform_outcome r = run_transform(ws, d, system_time);
        if (r.ran) {
          act.action = "transformed";
          act.records = r.records_out;
          if (r.late_ignored > 0)
            act.detail =
                std::to_string(r.late_ignored) + " late records ignored";
        } else {
          act.action = "up-to-date";
        }
        if (healed > 0) {
          if (!act.detail.empty()) act.detail += "; ";
          act.detail += std::to_string(healed) + " objects regenerated";
        }
      }
    } catch (const error& e) {
      act.action = "failed";
      act.detail = e.what();
      failed.insert(d);
      rep.ok = false;
    }
    rep.actions.push_back(std::move(act));
  }
  return rep;
}

// ---- verification ----

integrity_report verify_integrity(const workspace& ws, const object_hash& id,
                                  bool transitive) {
  integrity_report rep;
  std::vector<object_hash> queue{id};
  std::set<object_hash> seen{id};
  while (!queue.empty()) {
    object_hash d = queue.front();
    queue.erase(queue.begin());
    std::optional<object_hash> head = ws.head(d);
    if (!head) {
      rep.valid = false;
      rep.failed_dataset = d;
      rep.failure = chain_finding{std::nullopt, {}, "dataset head missing"};
      break;
    }
    validation_report r = validate_chain(ws.store(), *head);
    rep.blocks_checked += r.blocks_checked;
    rep.objects_checked += r.objects_checked;
    if (!r.valid) {
      rep.valid = false;
      rep.failed_dataset = d;
      rep.failure = r.failure;
      break;
    }
    if (!transitive) break;
    // The chain just validated, so loading it cannot fail.
    loaded_chain c = load_chain(ws.store(), *head);
    if (const auto* t = c.current_transform())
      for (const auto& in : t->inputs)
        if (seen.insert(in).second) queue.push_back(in);
  }
  return rep;
}

repro_report verify_reproducibility(workspace& ws, const object_hash& id,
                                    bool transitive) {
  repro_report rep;
  std::vector<object_hash> order;
  if (transitive) {
    for (const auto& n : lineage(ws, id)) order.push_back(n.id);
  } else {
    order.push_back(id);
  }
  for (const auto& d : order) {
    loaded_chain chain = ws.chain_of(d);
    if (chain.kind() != dataset_kind::derivative) continue;
    replay_chain(ws, chain, [&](const replay_step& s) {
      rep.blocks_replayed++;
      if (auto diff = compare_step(s)) {
        rep.ok = false;
        rep.failed_dataset = d;
        rep.failure = repro_finding{s.sequence, *diff};
        return false;
      }
      return true;
    });
    if (!rep.ok) break;
  }
  return rep;
}

// ---- graph queries ----

std::vector<lineage_node> lineage(const workspace& ws, const object_hash& id) {
  std::vector<lineage_node> out;
  std::set<object_hash> done;
  std::set<object_hash> visiting;
  std::function<void(const object_hash&)> visit = [&](const object_hash& d) {
    if (done.count(d)) return;
    if (!visiting.insert(d).second)
      raise(errc::cycle_detected, "dataset graph contains a cycle");
    loaded_chain c = ws.chain_of(d);
    lineage_node n;
    n.id = d;
    n.name = display_name(ws, d);
    n.kind = c.kind();
    if (const auto* t = c.current_transform()) {
      n.inputs = t->inputs;
      for (const auto& in : t->inputs) visit(in);
    }
    visiting.erase(d);
    done.insert(d);
    out.push_back(std::move(n));
  };
  visit(id);
  return out;
}

namespace {

provenance_node expand_provenance(workspace& ws, const object_hash& id,
                                  std::vector<uint64_t> offsets) {
  loaded_chain chain = ws.chain_of(id);
  std::sort(offsets.begin(), offsets.end());
  offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());

  provenance_node node;
  node.dataset = id;
  node.name = display_name(ws, id);
  node.kind = chain.kind();
  node.offsets = offsets;

  // Which blocks own the target offsets. Replay only needs to reach the
  // last of them.
  std::set<size_t> wanted;
  for (size_t i = 0; i < chain.size(); i++) {
    const slice_ref* s = event_output_slice(chain.blocks[i].block.event);
    if (!s) continue;
    bool owns = false;
    for (uint64_t o : offsets)
      if (o >= s->offset_start && o < s->offset_end) owns = true;
    if (owns) {
      wanted.insert(i);
      node.block_sequences.push_back(chain.blocks[i].block.sequence_number);
    }
  }
  if (chain.kind() == dataset_kind::root || wanted.empty()) return node;
  size_t stop_after = *wanted.rbegin();

  struct row_sink : engine::trace_sink {
    std::vector<std::vector<std::pair<size_t, int64_t>>> rows;
    void row(const engine::output_row&,
             const std::vector<std::pair<size_t, int64_t>>& sources) override {
      rows.push_back(sources);
    }
  };
  std::map<size_t, row_sink> sinks;
  std::map<object_hash, std::set<uint64_t>> child_offsets;

  replay_chain(
      ws, chain,
      [&](const replay_step& s) {
        if (!wanted.count(s.block_index)) return s.block_index < stop_after;
        const execute_transform_event& et = *s.recorded;
        const row_sink& sink = sinks.at(s.block_index);
        for (uint64_t o : offsets) {
          if (o < et.output_slice->offset_start ||
              o >= et.output_slice->offset_end)
            continue;
          size_t row_idx = o - et.output_slice->offset_start;
          if (row_idx >= sink.rows.size())
            raise(errc::verification_failed,
                  "replay of block " + std::to_string(s.sequence) +
                      " produced fewer records than its slice");
          for (const auto& [input_idx, src_off] : sink.rows[row_idx])
            child_offsets[et.input_slices[input_idx].dataset_id].insert(
                static_cast<uint64_t>(src_off));
        }
        return s.block_index < stop_after;
      },
      [&](size_t bi) -> engine::trace_sink* {
        return wanted.count(bi) ? &sinks[bi] : nullptr;
      });

  for (const auto& [child_id, offs] : child_offsets)
    node.children.push_back(expand_provenance(
        ws, child_id, std::vector<uint64_t>(offs.begin(), offs.end())));
  return node;
}

}  // namespace

provenance_node trace(workspace& ws, const object_hash& id, uint64_t offset) {
  loaded_chain chain = ws.chain_of(id);
  if (offset >= chain.record_count())
    raise(errc::offset_not_found,
          "dataset has no record at offset " + std::to_string(offset));
  return expand_provenance(ws, id, {offset});
}

// ---- references and reads ----

stable_ref resolve_as_of(const workspace& ws, const object_hash& id,
                         int64_t t) {
  loaded_chain chain = ws.chain_of(id);
  stable_ref ref;
  ref.dataset = id;
  size_t n = chain.blocks_as_of(t);
  ref.block_count = n;
  if (n == 0) return ref;
  loaded_chain prefix = chain_prefix(chain, n);
  ref.head = prefix.head();
  ref.offset_bound = prefix.record_count();
  return ref;
}

std::vector<record> read_reference(const workspace& ws, const stable_ref& ref) {
  if (!ref.head) return {};
  loaded_chain prefix = load_chain(ws.store(), *ref.head);
  if (prefix.dataset_id() != ref.dataset)
    raise(errc::invalid_chain,
          "reference head belongs to a different dataset");
  return read_input_records(ws.store(), prefix, 0, ref.offset_bound);
}

watermark_outcome set_watermark(workspace& ws, const object_hash& id,
                                int64_t new_watermark, int64_t system_time) {
  file_lock guard = ws.lock_dataset(id);
  loaded_chain chain = ws.chain_of(id);
  if (chain.kind() != dataset_kind::root)
    raise(errc::illegal_operation_for_kind,
          "watermarks are set on root datasets; derivatives compute theirs");
  std::optional<int64_t> cur = chain.watermark();
  if (cur && new_watermark < *cur)
    raise(errc::watermark_regression, "watermark would move backwards");
  if (cur && new_watermark == *cur) return {false, chain.head()};
  metadata_block b =
      make_next_block(&chain, set_watermark_event{new_watermark}, system_time);
  object_hash head = store_block(ws.store(), b);
  ws.set_head(id, head);
  return {true, head};
}

std::vector<value::map_t> project_state(const workspace& ws,
                                        const object_hash& id,
                                        std::optional<int64_t> as_of) {
  loaded_chain chain = ws.chain_of(id);
  size_t nblocks = as_of ? chain.blocks_as_of(*as_of) : chain.size();
  if (nblocks == 0) return {};
  loaded_chain prefix = chain_prefix(chain, nblocks);
  std::vector<record> recs =
      read_input_records(ws.store(), prefix, 0, prefix.record_count());

  const polling_source* src = nullptr;
  if (prefix.kind() == dataset_kind::root)
    if (const auto* sp = prefix.current_source()) src = &sp->source;
  if (!src || src->merge.kind != merge_kind::snapshot) {
    std::vector<value::map_t> out;
    out.reserve(recs.size());
    for (auto& r : recs) out.push_back(std::move(r.payload));
    return out;
  }

  // Fold the change ledger: last add/correct per key wins, retract erases.
  std::map<std::string, value::map_t> state;
  for (auto& r : recs) {
    if (!r.observed)
      raise(errc::schema_violation,
            "snapshot-merge record lacks its change verb");
    value::array_t key;
    for (const auto& k : src->merge.primary_key) {
      auto it = r.payload.find(k);
      if (it == r.payload.end())
        raise(errc::schema_violation, "record lacks key column " + k);
      key.push_back(it->second);
    }
    std::string kb = canonical_encode(value::array(std::move(key)));
    switch (*r.observed) {
      case observed_op::append:
      case observed_op::correct:
        state[kb] = std::move(r.payload);
        break;
      case observed_op::retract:
        state.erase(kb);
        break;
    }
  }
  std::vector<value::map_t> out;
  out.reserve(state.size());
  for (auto& [kb, payload] : state) out.push_back(std::move(payload));
  return out;
}

std::vector<record> tail_records(const workspace& ws, const object_hash& id,
                                 uint64_t n) {
  loaded_chain chain = ws.chain_of(id);
  uint64_t count = chain.record_count();
  uint64_t start = count > n ? count - n : 0;
  return read_input_records(ws.store(), chain, start, count);
}

}  // namespace odf
