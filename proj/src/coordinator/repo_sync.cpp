#include "coordinator/repo_sync.hpp"

#include <fstream>

#include "core/errors.hpp"
#include "core/util.hpp"

namespace odf {

namespace fs = std::filesystem;

namespace {

fs::path ref_path(const fs::path& repo, const object_hash& id) {
  return repo / "refs" / id;
}

std::optional<object_hash> read_ref(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::string line;
  std::getline(in, line);
  if (!is_object_hash(line))
    raise(errc::invalid_chain, "repository ref " + p.string() + " is malformed");
  return line;
}

bool contains_block(const loaded_chain& c, const object_hash& h) {
  for (const auto& lb : c.blocks)
    if (lb.hash == h) return true;
  return false;
}

// Data objects a block references beside itself. Checkpoints are marked
// optional: a repository without them is still complete enough to verify.
struct data_ref {
  object_hash hash;
  bool required = true;
};

std::vector<data_ref> block_data_refs(const metadata_block& b) {
  std::vector<data_ref> out;
  if (const slice_ref* s = event_output_slice(b.event))
    out.push_back({s->slice_hash, true});
  if (const auto* et = std::get_if<execute_transform_event>(&b.event))
    if (et->new_checkpoint) out.push_back({*et->new_checkpoint, false});
  return out;
}

void copy_object(const object_store& from, object_store& to,
                 const object_hash& h, transfer_report& rep, bool is_block) {
  if (to.has(h)) return;
  to.put_expected(h, from.get(h));
  rep.objects_transferred++;
  if (is_block) rep.blocks_transferred++;
}

}  // namespace

transfer_report push(workspace& ws, const object_hash& dataset,
                     const fs::path& repo_path) {
  transfer_report rep;
  rep.dataset = dataset;
  loaded_chain chain = ws.chain_of(dataset);
  validation_report local = validate_chain(ws.store(), chain.head());
  if (!local.valid)
    raise(errc::verification_failed,
          "refusing to push: local dataset fails validation: " +
              local.failure->what);

  std::error_code ec;
  fs::create_directories(repo_path / "objects", ec);
  if (!ec) fs::create_directories(repo_path / "refs", ec);
  if (ec)
    raise(errc::repo_unavailable,
          "cannot create repository at " + repo_path.string());
  object_store remote(repo_path / "objects");

  // Per-dataset lock; pushers of different datasets never meet.
  file_lock guard(repo_path / "refs" / (dataset + ".lock"));
  std::optional<object_hash> remote_head = read_ref(ref_path(repo_path, dataset));
  if (remote_head) {
    if (*remote_head == chain.head()) {
      rep.head = chain.head();
      return rep;
    }
    if (!contains_block(chain, *remote_head))
      raise(errc::non_fast_forward,
            "repository head is not an ancestor of the local head");
  }

  for (const auto& lb : chain.blocks) {
    copy_object(ws.store(), remote, lb.hash, rep, true);
    for (const auto& ref : block_data_refs(lb.block))
      copy_object(ws.store(), remote, ref.hash, rep, false);
  }
  write_file_atomic(ref_path(repo_path, dataset), chain.head() + "\n");
  rep.head = chain.head();
  rep.ref_created = !remote_head.has_value();
  rep.updated = true;
  return rep;
}

transfer_report pull_remote(workspace& ws, const object_hash& dataset_id,
                            const fs::path& repo_path) {
  transfer_report rep;
  rep.dataset = dataset_id;
  if (!fs::is_directory(repo_path / "objects"))
    raise(errc::repo_unavailable,
          "no repository at " + repo_path.string());
  object_store remote(repo_path / "objects");
  std::optional<object_hash> remote_head =
      read_ref(ref_path(repo_path, dataset_id));
  if (!remote_head)
    raise(errc::repo_unavailable,
          "repository has no ref for dataset " + dataset_id);

  bool known = ws.has_dataset(dataset_id);
  std::optional<object_hash> local_head =
      known ? ws.head(dataset_id) : std::nullopt;
  if (local_head && *local_head == *remote_head) {
    rep.head = *local_head;
    return rep;
  }

  // Validate the whole remote chain against the repository only; nothing
  // local is touched until it all checks out.
  loaded_chain chain;
  try {
    chain = load_chain(remote, *remote_head);
  } catch (const error& e) {
    if (e.code() == errc::object_not_found)
      raise(errc::object_missing_in_repo, e.what());
    raise(errc::invalid_chain, e.what());
  }
  if (chain.dataset_id() != dataset_id)
    raise(errc::invalid_chain, "repository ref names a different dataset");
  for (const auto& lb : chain.blocks) {
    for (const auto& ref : block_data_refs(lb.block)) {
      if (!ref.required && !remote.has(ref.hash)) continue;
      try {
        remote.get(ref.hash);  // re-hashes the bytes
      } catch (const error& e) {
        if (e.code() == errc::object_not_found)
          raise(errc::object_missing_in_repo, e.what());
        raise(errc::invalid_chain, e.what());
      }
    }
    if (const slice_ref* s = event_output_slice(lb.block.event)) {
      try {
        check_slice_envelope(remote, *s, lb.block.system_time);
      } catch (const error& e) {
        raise(errc::invalid_chain, e.what());
      }
    }
  }

  if (local_head) {
    if (!contains_block(chain, *local_head)) {
      // Local might simply be ahead; that is not divergence.
      loaded_chain local = ws.chain_of(dataset_id);
      if (contains_block(local, *remote_head)) {
        rep.head = *local_head;
        return rep;
      }
      raise(errc::non_fast_forward,
            "local dataset has diverged from the repository");
    }
  }

  for (const auto& lb : chain.blocks) {
    copy_object(remote, ws.store(), lb.hash, rep, true);
    for (const auto& ref : block_data_refs(lb.block)) {
      if (!ref.required && !remote.has(ref.hash)) continue;
      copy_object(remote, ws.store(), ref.hash, rep, false);
    }
  }
  ws.set_head(dataset_id, chain.head());
  rep.head = chain.head();
  rep.ref_created = !known;
  rep.updated = true;

  // Make the dataset addressable by its seed name when that name is free.
  const std::string& name = chain.seed().dataset_name;
  if (!known && !name.empty() && !ws.id_of(name))
    ws.bind_name(name, dataset_id);
  return rep;
}

}  // namespace odf
