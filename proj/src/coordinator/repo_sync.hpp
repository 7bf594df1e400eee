#pragma once

#include <filesystem>

#include "coordinator/workspace.hpp"

namespace odf {

// A repository is a directory: objects/ in the workspace store format plus
// refs/<dataset_id> holding the head hash, one line. Any shared filesystem
// works as transport; the trust lives in the hashes.

struct transfer_report {
  object_hash dataset;
  object_hash head;  // head after the operation
  uint64_t objects_transferred = 0;
  uint64_t blocks_transferred = 0;  // subset of objects_transferred
  bool ref_created = false;  // push: new ref; pull: dataset was new here
  bool updated = false;      // a head moved (false means already in sync)
};

// Copies the dataset's missing objects into the repository, then
// fast-forwards refs/<dataset_id> under a per-dataset lock. The repository
// is created on first use. The local dataset is fully validated first so
// corruption never propagates.
transfer_report push(workspace& ws, const object_hash& dataset,
                     const std::filesystem::path& repo_path);

// Fetches the remote chain and validates everything against the repository
// BEFORE any local write: a bad repository can deny service but never get
// altered data adopted. Checkpoint objects may be absent remotely (they are
// recomputable); anything present must hash-verify. Refuses heads that are
// not fast-forwards of local history.
transfer_report pull_remote(workspace& ws, const object_hash& dataset_id,
                            const std::filesystem::path& repo_path);

}  // namespace odf
