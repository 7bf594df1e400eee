#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "coordinator/workspace.hpp"
#include "engine/engine.hpp"

namespace odf {

struct transform_outcome {
  bool ran = false;  // false: no new input and no watermark change
  object_hash block_hash;
  uint64_t records_out = 0;
  int64_t late_ignored = 0;
  std::optional<int64_t> output_watermark;
};

// One scheduling round for a derivative dataset: gather each input's records
// and watermark beyond the cursors recorded in the chain, execute, append an
// ExecuteTransform block. The head moves only after every object is stored.
transform_outcome run_transform(workspace& ws, const object_hash& id,
                                int64_t system_time);

struct pull_action {
  object_hash id;
  std::string name;
  std::string action;  // ingested | transformed | up-to-date | failed | skipped
  std::string detail;
  uint64_t records = 0;
};

struct pull_report {
  std::vector<pull_action> actions;
  bool ok = true;
};

// Refresh a dataset and everything it depends on, inputs before consumers.
// Failures skip the failed node's dependents; independent branches continue.
// Missing derivative slice/checkpoint objects are regenerated by replay
// before new work runs (derivative data is a cache over the chain).
pull_report pull(workspace& ws, const object_hash& target, int64_t system_time);

struct ingest_outcome_report {
  bool unchanged = false;
  uint64_t records = 0;
  std::optional<int64_t> watermark;
};

// One polling round from the dataset's configured (or overridden) source file.
ingest_outcome_report ingest_dataset(workspace& ws, const object_hash& id,
                                     const std::optional<std::filesystem::path>&
                                         source_override,
                                     int64_t system_time);

// Integrity of the dataset's own chain, plus its transitive inputs when
// `transitive`. First failure wins; report mirrors validate_chain's.
struct integrity_report {
  bool valid = true;
  uint64_t blocks_checked = 0;
  uint64_t objects_checked = 0;
  std::optional<object_hash> failed_dataset;
  std::optional<chain_finding> failure;
};

integrity_report verify_integrity(const workspace& ws, const object_hash& id,
                                  bool transitive);

struct repro_finding {
  uint64_t sequence = 0;
  std::string what;
};

struct repro_report {
  bool ok = true;
  uint64_t blocks_replayed = 0;
  std::optional<object_hash> failed_dataset;
  std::optional<repro_finding> failure;
};

// Re-executes every ExecuteTransform block (each against the transform in
// force at its place in the chain, inputs pinned by the recorded prefixes)
// and byte-compares slice hash, checkpoint hash, watermark assertion and
// late count. Needs none of the dataset's own data/checkpoint objects: the
// replay recomputes them. With `transitive`, derivative inputs verify first.
repro_report verify_reproducibility(workspace& ws, const object_hash& id,
                                    bool transitive);

struct lineage_node {
  object_hash id;
  std::string name;  // registry name, or the id when unregistered
  dataset_kind kind;
  std::vector<object_hash> inputs;
};

// Transitive input graph, inputs listed before consumers, target last.
std::vector<lineage_node> lineage(const workspace& ws, const object_hash& id);

struct provenance_node {
  object_hash dataset;
  std::string name;
  dataset_kind kind;
  std::vector<uint64_t> offsets;          // contributing records, ascending
  std::vector<uint64_t> block_sequences;  // blocks owning those offsets
  std::vector<provenance_node> children;  // one per contributing input dataset
};

// Record-level provenance: which exact input records determined the record
// at `offset`, recursively down to root datasets.
provenance_node trace(workspace& ws, const object_hash& id, uint64_t offset);

struct stable_ref {
  object_hash dataset;
  std::optional<object_hash> head;  // block prefix head; null = empty prefix
  uint64_t block_count = 0;
  uint64_t offset_bound = 0;  // records in the prefix
};

// (dataset, system time) -> fixed block prefix + offset bound. Later growth
// never changes what a reference resolves to.
stable_ref resolve_as_of(const workspace& ws, const object_hash& id, int64_t t);
std::vector<record> read_reference(const workspace& ws, const stable_ref& ref);

// Manual watermark advance for a root dataset; equal value is a no-op.
struct watermark_outcome {
  bool changed = false;
  object_hash block_hash;
};
watermark_outcome set_watermark(workspace& ws, const object_hash& id,
                                int64_t new_watermark, int64_t system_time);

// State as of a system time: snapshot-merge roots fold their change events
// (add/correct/remove) per primary key; everything else is the ledger itself.
std::vector<value::map_t> project_state(const workspace& ws,
                                        const object_hash& id,
                                        std::optional<int64_t> as_of);

std::vector<record> tail_records(const workspace& ws, const object_hash& id,
                                 uint64_t n);

// Replay internals shared by verification, healing and trace.
struct replay_step {
  size_t block_index = 0;
  uint64_t sequence = 0;
  const execute_transform_event* recorded = nullptr;
  std::vector<record> out_records;      // offsets and system_time assigned
  slice_ref slice;                      // meaningful when out_records nonempty
  std::string slice_bytes;
  std::string checkpoint_bytes;
  object_hash checkpoint_hash;
  std::optional<int64_t> wm_assertion;  // recomputed output_watermark field
  int64_t late_ignored = 0;
};

// Re-executes the chain's ExecuteTransform blocks oldest first. `on_step`
// returns false to stop early. `sink_for` may supply a trace sink for
// chosen blocks. Throws engine_version_unavailable when a block's recorded
// engine is not this build's.
void replay_chain(
    workspace& ws, const loaded_chain& chain,
    const std::function<bool(const replay_step&)>& on_step,
    const std::function<engine::trace_sink*(size_t block_index)>& sink_for = {});

}  // namespace odf
