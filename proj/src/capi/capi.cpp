#include "odf/odf.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "coordinator/coordinator.hpp"
#include "coordinator/manifest.hpp"
#include "coordinator/repo_sync.hpp"
#include "core/errors.hpp"
#include "core/util.hpp"

using namespace odf;
namespace fs = std::filesystem;

struct odf_workspace {
  workspace ws;
  std::string root;
};

namespace {

thread_local std::string g_error;

char* dup_out(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

int user_error(const std::string& msg) {
  g_error = msg;
  return ODF_E_USER;
}

// Runs the operation body, mapping exceptions onto status codes. The body
// itself returns a status so verify can report failure with output.
template <typename F>
int guarded(F&& body) {
  g_error.clear();
  try {
    return body();
  } catch (const error& e) {
    g_error = e.what();
    return static_cast<int>(e.cls());
  } catch (const fs::filesystem_error& e) {
    g_error = e.what();
    return ODF_E_IO;
  } catch (const std::exception& e) {
    g_error = e.what();
    return ODF_E_IO;
  }
}

std::string ts(int64_t ms) { return format_timestamp(ms); }

value ts_or_null(const std::optional<int64_t>& ms) {
  return ms ? value::time_ms(*ms) : value::null();
}

std::string brief(const object_hash& h) { return h.substr(0, 12); }

std::string display_name(const workspace& ws, const object_hash& id) {
  if (auto n = ws.name_of(id)) return *n;
  return id;
}

}  // namespace

extern "C" {

const char* odf_last_error(void) { return g_error.c_str(); }

void odf_string_free(char* s) { std::free(s); }

int odf_workspace_init(const char* dir, odf_workspace** out) {
  if (!dir || !out) return user_error("odf_workspace_init: null argument");
  *out = nullptr;
  return guarded([&] {
    auto ws = workspace::init(dir);
    std::string root = ws.root().string();
    *out = new odf_workspace{std::move(ws), std::move(root)};
    return ODF_OK;
  });
}

int odf_workspace_open(const char* start_dir, odf_workspace** out) {
  if (!start_dir || !out) return user_error("odf_workspace_open: null argument");
  *out = nullptr;
  return guarded([&] {
    auto ws = workspace::open(workspace::discover(start_dir));
    std::string root = ws.root().string();
    *out = new odf_workspace{std::move(ws), std::move(root)};
    return ODF_OK;
  });
}

void odf_workspace_close(odf_workspace* ws) { delete ws; }

const char* odf_workspace_root(const odf_workspace* ws) {
  return ws ? ws->root.c_str() : "";
}

int odf_parse_time(const char* text, int64_t* out_ms) {
  if (!text || !out_ms) return user_error("odf_parse_time: null argument");
  g_error.clear();
  if (auto ms = parse_timestamp_lenient(text)) {
    *out_ms = *ms;
    return ODF_OK;
  }
  return user_error(std::string("not an RFC 3339 UTC timestamp: ") + text);
}

int odf_add(odf_workspace* h, const char* manifest_path, int64_t now_ms,
            int render, char** out) {
  if (!h || !manifest_path || !out) return user_error("odf_add: null argument");
  return guarded([&] {
    dataset_manifest m = load_manifest(manifest_path);
    add_outcome r = h->ws.add_dataset(m, now_ms);
    if (render == ODF_RENDER_JSON) {
      value::map_t j;
      j["dataset"] = value::string(r.id);
      j["name"] = value::string(manifest_name(m));
      j["created"] = value::boolean(r.created);
      j["updated"] = value::boolean(r.updated);
      *out = dup_out(canonical_encode(value::map(std::move(j))));
    } else {
      std::string what = r.created   ? "added"
                         : r.updated ? "updated"
                                     : "unchanged";
      *out = dup_out(what + " " + manifest_name(m) + " (" + r.id + ")\n");
    }
    return ODF_OK;
  });
}

int odf_ingest(odf_workspace* h, const char* dataset, const char* source_path,
               int64_t now_ms, int render, char** out) {
  if (!h || !dataset || !out) return user_error("odf_ingest: null argument");
  return guarded([&] {
    object_hash id = h->ws.resolve(dataset);
    std::optional<fs::path> src;
    if (source_path) src = fs::path(source_path);
    ingest_outcome_report r = ingest_dataset(h->ws, id, src, now_ms);
    if (render == ODF_RENDER_JSON) {
      value::map_t j;
      j["dataset"] = value::string(id);
      j["name"] = value::string(display_name(h->ws, id));
      j["unchanged"] = value::boolean(r.unchanged);
      j["records"] = value::integer(static_cast<int64_t>(r.records));
      j["watermark"] = ts_or_null(r.watermark);
      *out = dup_out(canonical_encode(value::map(std::move(j))));
    } else {
      std::ostringstream os;
      if (r.unchanged) {
        os << display_name(h->ws, id) << ": source unchanged\n";
      } else {
        os << display_name(h->ws, id) << ": " << r.records
           << " records ingested";
        if (r.watermark) os << ", watermark " << ts(*r.watermark);
        os << "\n";
      }
      *out = dup_out(os.str());
    }
    return ODF_OK;
  });
}

int odf_pull(odf_workspace* h, const char* dataset, int64_t now_ms, int render,
             char** out) {
  if (!h || !dataset || !out) return user_error("odf_pull: null argument");
  return guarded([&] {
    object_hash id = h->ws.resolve(dataset);
    pull_report r = pull(h->ws, id, now_ms);
    if (render == ODF_RENDER_JSON) {
      value::array_t acts;
      for (const auto& a : r.actions) {
        value::map_t j;
        j["dataset"] = value::string(a.id);
        j["name"] = value::string(a.name);
        j["action"] = value::string(a.action);
        j["detail"] = value::string(a.detail);
        j["records"] = value::integer(static_cast<int64_t>(a.records));
        acts.push_back(value::map(std::move(j)));
      }
      value::map_t j;
      j["ok"] = value::boolean(r.ok);
      j["actions"] = value::array(std::move(acts));
      *out = dup_out(canonical_encode(value::map(std::move(j))));
    } else {
      std::ostringstream os;
      for (const auto& a : r.actions) {
        os << a.name << ": " << a.action;
        if (a.action == "ingested" || a.action == "transformed")
          os << ", " << a.records << " records";
        if (!a.detail.empty()) os << " (" << a.detail << ")";
        os << "\n";
      }
      *out = dup_out(os.str());
    }
    return r.ok ? ODF_OK : ODF_E_USER;
  });
}

int odf_log(odf_workspace* h, const char* dataset, int render, char** out) {
  if (!h || !dataset || !out) return user_error("odf_log: null argument");
  return guarded([&] {
    object_hash id = h->ws.resolve(dataset);
    loaded_chain chain = h->ws.chain_of(id);
    if (render == ODF_RENDER_JSON) {
      value::array_t blocks;
      for (const auto& lb : chain.blocks) {
        value::map_t j;
        j["block"] = value::string(lb.hash);
        j["sequence"] =
            value::integer(static_cast<int64_t>(lb.block.sequence_number));
        j["system_time"] = value::time_ms(lb.block.system_time);
        j["event"] = value::string(event_kind_name(lb.block.event));
        j["details"] = event_to_value(lb.block.event);
        blocks.push_back(value::map(std::move(j)));
      }
      value::map_t j;
      j["dataset"] = value::string(id);
      j["name"] = value::string(display_name(h->ws, id));
      j["blocks"] = value::array(std::move(blocks));
      *out = dup_out(canonical_encode(value::map(std::move(j))));
    } else {
      std::ostringstream os;
      for (auto it = chain.blocks.rbegin(); it != chain.blocks.rend(); ++it) {
        const auto& lb = *it;
        os << "#" << lb.block.sequence_number << "  " << brief(lb.hash)
           << "  " << ts(lb.block.system_time) << "  "
           << event_kind_name(lb.block.event);
        std::visit(
            [&](const auto& e) {
              using E = std::decay_t<decltype(e)>;
              if constexpr (std::is_same_v<E, seed_event>) {
                os << "  " << dataset_kind_name(e.kind) << " \""
                   << e.dataset_name << "\"";
              } else if constexpr (std::is_same_v<E, set_polling_source_event>) {
                os << "  " << source_format_name(e.source.format) << ", "
                   << e.source.schema.columns.size() << " columns, "
                   << merge_kind_name(e.source.merge.kind) << " merge";
              } else if constexpr (std::is_same_v<E, set_transform_event>) {
                os << "  " << e.inputs.size() << " input"
                   << (e.inputs.size() == 1 ? "" : "s") << ", engine "
                   << e.engine.name << " " << e.engine.semantic_version;
              } else if constexpr (std::is_same_v<E, add_data_event> ||
                                   std::is_same_v<E, execute_transform_event>) {
                if (e.output_slice)
                  os << "  records [" << e.output_slice->offset_start << ", "
                     << e.output_slice->offset_end << ")";
                else
                  os << "  no new records";
                if (e.output_watermark)
                  os << ", watermark " << ts(*e.output_watermark);
                if constexpr (std::is_same_v<E, execute_transform_event>) {
                  if (e.late_records_ignored)
                    os << ", " << e.late_records_ignored << " late ignored";
                }
              } else if constexpr (std::is_same_v<E, set_watermark_event>) {
                os << "  " << ts(e.new_watermark);
              }
            },
            lb.block.event);
        os << "\n";
      }
      *out = dup_out(os.str());
    }
    return ODF_OK;
  });
}

int odf_verify(odf_workspace* h, const char* dataset, int integrity_only,
               int render, char** out) {
  if (!h || !dataset || !out) return user_error("odf_verify: null argument");
  return guarded([&] {
    object_hash id = h->ws.resolve(dataset);
    integrity_report ir = verify_integrity(h->ws, id, true);
    std::optional<repro_report> rr;
    if (ir.valid && !integrity_only)
      rr = verify_reproducibility(h->ws, id, true);
    bool ok = ir.valid && (!rr || rr->ok);

    if (render == ODF_RENDER_JSON) {
      value::map_t ji;
      ji["valid"] = value::boolean(ir.valid);
      ji["blocks_checked"] =
          value::integer(static_cast<int64_t>(ir.blocks_checked));
      ji["objects_checked"] =
          value::integer(static_cast<int64_t>(ir.objects_checked));
      if (!ir.valid) {
        ji["failed_dataset"] = value::string(
            ir.failed_dataset ? display_name(h->ws, *ir.failed_dataset) : "");
        value::map_t jf;
        if (ir.failure) {
          jf["sequence"] = ir.failure->sequence
                               ? value::integer(static_cast<int64_t>(
                                     *ir.failure->sequence))
                               : value::null();
          jf["block"] = value::string(ir.failure->block_hash);
          jf["what"] = value::string(ir.failure->what);
        }
        ji["failure"] = value::map(std::move(jf));
      }
      value::map_t j;
      j["dataset"] = value::string(id);
      j["name"] = value::string(display_name(h->ws, id));
      j["valid"] = value::boolean(ok);
      j["integrity"] = value::map(std::move(ji));
      if (rr) {
        value::map_t jr;
        jr["ok"] = value::boolean(rr->ok);
        jr["blocks_replayed"] =
            value::integer(static_cast<int64_t>(rr->blocks_replayed));
        if (!rr->ok) {
          jr["failed_dataset"] = value::string(
              rr->failed_dataset ? display_name(h->ws, *rr->failed_dataset)
                                 : "");
          if (rr->failure) {
            value::map_t jf;
            jf["sequence"] =
                value::integer(static_cast<int64_t>(rr->failure->sequence));
            jf["what"] = value::string(rr->failure->what);
            jr["failure"] = value::map(std::move(jf));
          }
        }
        j["reproducibility"] = value::map(std::move(jr));
      } else {
        j["reproducibility"] = value::null();
      }
      *out = dup_out(canonical_encode(value::map(std::move(j))));
    } else {
      std::ostringstream os;
      os << "integrity: " << ir.blocks_checked << " blocks, "
         << ir.objects_checked << " objects: ";
      if (ir.valid) {
        os << "ok\n";
      } else {
        os << "FAILED\n  dataset "
           << (ir.failed_dataset ? display_name(h->ws, *ir.failed_dataset)
                                 : std::string("?"));
        if (ir.failure) {
          if (ir.failure->sequence) os << " block #" << *ir.failure->sequence;
          os << ": " << ir.failure->what;
        }
        os << "\n";
      }
      if (rr) {
        os << "reproducibility: " << rr->blocks_replayed
           << " transforms replayed: ";
        if (rr->ok) {
          os << "ok\n";
        } else {
          os << "FAILED\n  dataset "
             << (rr->failed_dataset ? display_name(h->ws, *rr->failed_dataset)
                                    : std::string("?"));
          if (rr->failure)
            os << " block #" << rr->failure->sequence << ": "
               << rr->failure->what;
          os << "\n";
        }
      }
      *out = dup_out(os.str());
    }
    if (!ok) g_error = "verification failed";
    return ok ? ODF_OK : ODF_E_VERIFY;
  });
}

int odf_lineage(odf_workspace* h, const char* dataset, int render,
                char** out) {
  if (!h || !dataset || !out) return user_error("odf_lineage: null argument");
  return guarded([&] {
    object_hash id = h->ws.resolve(dataset);
    std::vector<lineage_node> nodes = lineage(h->ws, id);
    if (render == ODF_RENDER_JSON) {
      value::array_t arr;
      for (const auto& n : nodes) {
        value::map_t j;
        j["dataset"] = value::string(n.id);
        j["name"] = value::string(n.name);
        j["kind"] = value::string(dataset_kind_name(n.kind));
        value::array_t ins;
        for (const auto& i : n.inputs) ins.push_back(value::string(i));
        j["inputs"] = value::array(std::move(ins));
        arr.push_back(value::map(std::move(j)));
      }
      *out = dup_out(canonical_encode(value::array(std::move(arr))));
    } else {
      std::ostringstream os;
      std::map<object_hash, std::string> names;
      for (const auto& n : nodes) names[n.id] = n.name;
      for (const auto& n : nodes) {
        os << n.name << " (" << dataset_kind_name(n.kind) << ")";
        if (!n.inputs.empty()) {
          os << " <-";
          for (const auto& i : n.inputs) os << " " << names[i];
        }
        os << "\n";
      }
      *out = dup_out(os.str());
    }
    return ODF_OK;
  });
}

namespace {

value provenance_to_value(const provenance_node& n) {
  value::map_t j;
  j["dataset"] = value::string(n.dataset);
  j["name"] = value::string(n.name);
  j["kind"] = value::string(dataset_kind_name(n.kind));
  value::array_t offs;
  for (uint64_t o : n.offsets)
    offs.push_back(value::integer(static_cast<int64_t>(o)));
  j["offsets"] = value::array(std::move(offs));
  value::array_t blks;
  for (uint64_t b : n.block_sequences)
    blks.push_back(value::integer(static_cast<int64_t>(b)));
  j["blocks"] = value::array(std::move(blks));
  value::array_t kids;
  for (const auto& c : n.children) kids.push_back(provenance_to_value(c));
  j["inputs"] = value::array(std::move(kids));
  return value::map(std::move(j));
}

void provenance_to_text(std::ostringstream& os, const provenance_node& n,
                        int depth) {
  for (int i = 0; i < depth; i++) os << "  ";
  os << n.name << " offsets [";
  for (size_t i = 0; i < n.offsets.size(); i++)
    os << (i ? " " : "") << n.offsets[i];
  os << "]";
  if (!n.block_sequences.empty()) {
    os << " in block" << (n.block_sequences.size() == 1 ? "" : "s") << " ";
    for (size_t i = 0; i < n.block_sequences.size(); i++)
      os << (i ? " " : "") << "#" << n.block_sequences[i];
  }
  os << "\n";
  for (const auto& c : n.children) provenance_to_text(os, c, depth + 1);
}

}  // namespace

int odf_trace(odf_workspace* h, const char* dataset, int64_t offset,
              int render, char** out) {
  if (!h || !dataset || !out) return user_error("odf_trace: null argument");
  if (offset < 0) return user_error("trace: offset must be non-negative");
  return guarded([&] {
    object_hash id = h->ws.resolve(dataset);
    provenance_node root = trace(h->ws, id, static_cast<uint64_t>(offset));
    if (render == ODF_RENDER_JSON) {
      *out = dup_out(canonical_encode(provenance_to_value(root)));
    } else {
      std::ostringstream os;
      provenance_to_text(os, root, 0);
      *out = dup_out(os.str());
    }
    return ODF_OK;
  });
}

int odf_project(odf_workspace* h, const char* dataset, const char* as_of,
                int render, char** out) {
  if (!h || !dataset || !out) return user_error("odf_project: null argument");
  return guarded([&] {
    object_hash id = h->ws.resolve(dataset);
    std::optional<int64_t> t;
    if (as_of) {
      auto ms = parse_timestamp_lenient(as_of);
      if (!ms)
        return user_error(std::string("not an RFC 3339 UTC timestamp: ") +
                          as_of);
      t = *ms;
    }
    std::vector<value::map_t> rows = project_state(h->ws, id, t);
    if (render == ODF_RENDER_JSON) {
      value::array_t arr;
      for (auto& r : rows) arr.push_back(value::map(std::move(r)));
      value::map_t j;
      j["dataset"] = value::string(id);
      j["as_of"] = ts_or_null(t);
      j["rows"] = value::array(std::move(arr));
      *out = dup_out(canonical_encode(value::map(std::move(j))));
    } else {
      std::ostringstream os;
      for (auto& r : rows) os << canonical_encode(value::map(std::move(r))) << "\n";
      *out = dup_out(os.str());
    }
    return ODF_OK;
  });
}

int odf_set_watermark(odf_workspace* h, const char* dataset,
                      const char* watermark, int64_t now_ms, int render,
                      char** out) {
  if (!h || !dataset || !watermark || !out)
    return user_error("odf_set_watermark: null argument");
  return guarded([&] {
    auto ms = parse_timestamp_lenient(watermark);
    if (!ms)
      return user_error(std::string("not an RFC 3339 UTC timestamp: ") +
                        watermark);
    object_hash id = h->ws.resolve(dataset);
    watermark_outcome r = set_watermark(h->ws, id, *ms, now_ms);
    if (render == ODF_RENDER_JSON) {
      value::map_t j;
      j["dataset"] = value::string(id);
      j["changed"] = value::boolean(r.changed);
      j["watermark"] = value::time_ms(*ms);
      *out = dup_out(canonical_encode(value::map(std::move(j))));
    } else {
      std::string name = display_name(h->ws, id);
      *out = dup_out(r.changed
                         ? name + ": watermark set to " + ts(*ms) + "\n"
                         : name + ": watermark already at " + ts(*ms) + "\n");
    }
    return ODF_OK;
  });
}

namespace {

int render_transfer(const workspace& ws, const transfer_report& r, int render,
                    const char* verb, char** out) {
  if (render == ODF_RENDER_JSON) {
    value::map_t j;
    j["dataset"] = value::string(r.dataset);
    j["head"] = value::string(r.head);
    j["updated"] = value::boolean(r.updated);
    j["ref_created"] = value::boolean(r.ref_created);
    j["objects_transferred"] =
        value::integer(static_cast<int64_t>(r.objects_transferred));
    j["blocks_transferred"] =
        value::integer(static_cast<int64_t>(r.blocks_transferred));
    *out = dup_out(canonical_encode(value::map(std::move(j))));
  } else {
    std::ostringstream os;
    os << display_name(ws, r.dataset) << ": ";
    if (!r.updated)
      os << "already in sync";
    else
      os << verb << " " << r.blocks_transferred << " blocks ("
         << r.objects_transferred << " objects)";
    os << ", head " << brief(r.head) << "\n";
    *out = dup_out(os.str());
  }
  return ODF_OK;
}

}  // namespace

int odf_push(odf_workspace* h, const char* dataset, const char* repo,
             int render, char** out) {
  if (!h || !dataset || !repo || !out)
    return user_error("odf_push: null argument");
  return guarded([&] {
    object_hash id = h->ws.resolve(dataset);
    transfer_report r = push(h->ws, id, repo);
    return render_transfer(h->ws, r, render, "pushed", out);
  });
}

int odf_pull_remote(odf_workspace* h, const char* dataset_or_id,
                    const char* repo, int render, char** out) {
  if (!h || !dataset_or_id || !repo || !out)
    return user_error("odf_pull_remote: null argument");
  return guarded([&] {
    // a known name or id resolves; an unknown id is adopted as given
    object_hash id;
    if (auto known = h->ws.id_of(dataset_or_id)) {
      id = *known;
    } else if (is_object_hash(dataset_or_id)) {
      id = dataset_or_id;
    } else if (h->ws.has_dataset(dataset_or_id)) {
      id = dataset_or_id;
    } else {
      return user_error(std::string("not a local dataset name and not a "
                                    "dataset id: ") +
                        dataset_or_id);
    }
    transfer_report r = pull_remote(h->ws, id, repo);
    return render_transfer(h->ws, r, render, "fetched", out);
  });
}

int odf_tail(odf_workspace* h, const char* dataset, int64_t n, int render,
             char** out) {
  if (!h || !dataset || !out) return user_error("odf_tail: null argument");
  if (n < 0) return user_error("tail: -n must be non-negative");
  return guarded([&] {
    object_hash id = h->ws.resolve(dataset);
    std::vector<record> recs =
        tail_records(h->ws, id, static_cast<uint64_t>(n));
    if (render == ODF_RENDER_JSON) {
      value::array_t arr;
      for (const auto& r : recs) arr.push_back(record_to_value(r));
      value::map_t j;
      j["dataset"] = value::string(id);
      j["records"] = value::array(std::move(arr));
      *out = dup_out(canonical_encode(value::map(std::move(j))));
    } else {
      std::ostringstream os;
      for (const auto& r : recs) os << canonical_encode(record_to_value(r)) << "\n";
      *out = dup_out(os.str());
    }
    return ODF_OK;
  });
}

}  // extern "C"
