#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coordinator/manifest.hpp"
#include "core/chain.hpp"
#include "core/object_store.hpp"
#include "dsl/dsl.hpp"

namespace odf {

// RAII exclusive advisory lock on a file; blocks until acquired.
class file_lock {
 public:
  explicit file_lock(const std::filesystem::path& p);
  ~file_lock();
  file_lock(file_lock&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  file_lock(const file_lock&) = delete;
  file_lock& operator=(const file_lock&) = delete;

 private:
  int fd_ = -1;
};

struct add_outcome {
  object_hash id;
  bool created = false;  // seed appended (dataset is new)
  bool updated = false;  // new source/transform appended to an existing chain
};

// On-disk layout, all under <root>/.odf:
//   config            format marker
//   objects/          content store (blocks, slices, checkpoints)
//   names             registry, one "<dataset_id> <name>" line per dataset
//   datasets/<id>/head     current chain head, hex
//   datasets/<id>/source   polling source path (roots added from a manifest)
//   datasets/<id>/lock     writer lock
class workspace {
 public:
  // ODF_WORKSPACE env var wins; otherwise walk up from `start` to the
  // nearest directory containing .odf.
  static std::filesystem::path discover(const std::filesystem::path& start);
  static workspace init(const std::filesystem::path& dir);
  static workspace open(const std::filesystem::path& dir);

  const std::filesystem::path& root() const { return root_; }
  object_store& store() { return store_; }
  const object_store& store() const { return store_; }

  std::map<std::string, object_hash> names() const;
  std::optional<object_hash> id_of(const std::string& name) const;
  std::optional<std::string> name_of(const object_hash& id) const;
  // Accepts a registered name or a full dataset id; unknown_dataset otherwise.
  object_hash resolve(const std::string& name_or_id) const;

  std::vector<object_hash> dataset_ids() const;
  bool has_dataset(const object_hash& id) const;
  std::optional<object_hash> head(const object_hash& id) const;
  void set_head(const object_hash& id, const object_hash& h);
  loaded_chain chain_of(const object_hash& id) const;

  std::optional<std::filesystem::path> source_path(const object_hash& id) const;
  void set_source_path(const object_hash& id, const std::string& p);

  // Register a name for a dataset that already has a head (sync adoption).
  void bind_name(const std::string& name, const object_hash& id);

  file_lock lock_dataset(const object_hash& id) const;

  // Materialize a manifest: Seed + SetPollingSource / SetTransform for new
  // names; for existing names an equal definition is a no-op and a changed
  // one appends the new source/transform block.
  add_outcome add_dataset(const dataset_manifest& m, int64_t system_time);

 private:
  explicit workspace(std::filesystem::path root);
  std::filesystem::path meta() const { return root_ / ".odf"; }
  std::filesystem::path dataset_dir(const object_hash& id) const {
    return meta() / "datasets" / id;
  }
  void save_names(const std::map<std::string, object_hash>& reg);

  std::filesystem::path root_;
  object_store store_;
};

// Leading blocks [0, block_count) as an independent chain view.
loaded_chain chain_prefix(const loaded_chain& c, size_t block_count);

// Schema a consumer sees when reading this chain: roots report their current
// source schema, derivatives the output schema of their current query
// (inputs resolved recursively through the workspace).
schema_def dataset_schema(const workspace& ws, const loaded_chain& chain);

// Analyze a transform's query against its inputs' schemas. `input_prefixes`
// are the input chains, already truncated to the views the execution sees.
dsl::typed_plan make_plan(const workspace& ws, const set_transform_event& t,
                          const std::vector<loaded_chain>& input_prefixes);

// Records of [offset_start, offset_end) as an engine input: roots are read
// era-aware against the prefix's schema, derivatives generically.
std::vector<record> read_input_records(const object_store& store,
                                       const loaded_chain& prefix,
                                       uint64_t offset_start,
                                       uint64_t offset_end);

}  // namespace odf
