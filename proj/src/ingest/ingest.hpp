#pragma once

#include <optional>
#include <string_view>

#include "core/chain.hpp"

namespace odf {

struct ingest_outcome {
  // source bytes matched the previous poll; nothing was written
  bool unchanged = false;
  std::optional<object_hash> new_head;
  uint64_t records_appended = 0;
  std::optional<int64_t> watermark;  // dataset watermark after the round
};

// One polling round against a root dataset: fingerprint short-circuit,
// parse, merge per the configured strategy, then append a single AddData
// block. The head ref is the caller's to update.
ingest_outcome ingest_round(object_store& store, const loaded_chain& chain,
                            std::string_view source_bytes,
                            int64_t system_time);

}  // namespace odf
