#pragma once

#include <vector>

#include "core/chain.hpp"

namespace odf {

// A root's source configuration and the first block it applies to.
struct source_era {
  size_t first_block = 0;
  const polling_source* source = nullptr;
};

std::vector<source_era> source_eras(const loaded_chain& chain);

// Records of a root dataset in offset order, each slice decoded and checked
// against the schema that was in force when it was written, then padded with
// nulls up to the current schema (schema changes are nullable extensions, so
// this is lossless).
std::vector<record> read_root_records(const object_store& store,
                                      const loaded_chain& chain,
                                      uint64_t offset_start,
                                      uint64_t offset_end);

// Records of any dataset with envelope checks only; derivative schemas live
// in their queries, not in the chain, so payloads are taken as written.
std::vector<record> read_records_generic(const object_store& store,
                                         const loaded_chain& chain,
                                         uint64_t offset_start,
                                         uint64_t offset_end);

}  // namespace odf
