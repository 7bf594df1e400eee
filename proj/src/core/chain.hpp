#pragma once

#include <optional>
#include <vector>

#include "core/events.hpp"
#include "core/object_store.hpp"

namespace odf {

struct loaded_block {
  metadata_block block;
  object_hash hash;
};

// A dataset's full metadata chain, oldest first. blocks[0] is the Seed and
// its hash is the dataset id (self-certifying).
struct loaded_chain {
  std::vector<loaded_block> blocks;

  size_t size() const { return blocks.size(); }
  const object_hash& head() const { return blocks.back().hash; }
  const object_hash& dataset_id() const { return blocks.front().hash; }
  const seed_event& seed() const {
    return std::get<seed_event>(blocks.front().block.event);
  }
  dataset_kind kind() const { return seed().kind; }

  // Latest non-null watermark assertion; null assertions never regress it.
  std::optional<int64_t> watermark() const;
  // system_time of the block that asserted the current watermark.
  std::optional<int64_t> watermark_system_time() const;

  // Next record offset (== total records across all output slices).
  uint64_t record_count() const;

  const set_polling_source_event* current_source() const;
  const set_transform_event* current_transform() const;

  // Number of leading blocks with system_time <= t. system_time is
  // non-decreasing, so this is a stable prefix (ties included).
  size_t blocks_as_of(int64_t t) const;
};

// Walks prev links from head; every block is hash-verified by the store and
// structurally validated. Throws on any problem.
loaded_chain load_chain(const object_store& store, const object_hash& head);

// Append preconditions (placement, ordering, watermark and offset
// monotonicity) checked against the current chain; nullptr chain = genesis.
// Returns the block; storing and ref update are the caller's job.
metadata_block make_next_block(const loaded_chain* chain, metadata_event e,
                               int64_t system_time);

object_hash store_block(object_store& store, const metadata_block& b);

struct chain_finding {
  std::optional<uint64_t> sequence;  // unknown when the head itself is bad
  object_hash block_hash;
  std::string what;
};

struct validation_report {
  bool valid = true;
  std::optional<chain_finding> failure;  // first failure, walking old -> new
  uint64_t blocks_checked = 0;
  uint64_t objects_checked = 0;
};

// Full integrity audit: re-hashes every reachable block, slice and checkpoint
// object, re-checks links, sequence density, system-time and watermark
// ordering, event placement, offset continuity, and slice envelopes against
// their refs. Stops at the first failure.
validation_report validate_chain(const object_store& store,
                                 const object_hash& head);

}  // namespace odf
