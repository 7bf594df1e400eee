#include "coordinator/workspace.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <set>
#include <sstream>

#include "core/dataset_io.hpp"
#include "core/errors.hpp"
#include "core/util.hpp"
#include "engine/engine.hpp"

namespace fs = std::filesystem;

namespace odf {

file_lock::file_lock(const fs::path& p) {
  fs::create_directories(p.parent_path());
  fd_ = ::open(p.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) raise(errc::io_failure, "cannot open lock file " + p.string());
  if (::flock(fd_, LOCK_EX) != 0) {
    ::close(fd_);
    raise(errc::io_failure, "cannot lock " + p.string());
  }
}

file_lock::~file_lock() {
  if (fd_ >= 0) ::close(fd_);  // closing releases the flock
}

workspace::workspace(fs::path root)
    : root_(std::move(root)), store_(root_ / ".odf" / "objects") {}

fs::path workspace::discover(const fs::path& start) {
  if (const char* env = std::getenv("ODF_WORKSPACE")) {
    fs::path p(env);
    if (fs::is_directory(p / ".odf")) return p;
    raise(errc::workspace_not_found,
          "ODF_WORKSPACE does not point at a workspace: " + p.string());
  }
  fs::path dir = fs::absolute(start).lexically_normal();
  while (true) {
    if (fs::is_directory(dir / ".odf")) return dir;
    fs::path up = dir.parent_path();
    if (up == dir) break;
    dir = up;
  }
  raise(errc::workspace_not_found,
        "no .odf workspace at or above " + start.string());
}

workspace workspace::init(const fs::path& dir) {
  fs::path meta = dir / ".odf";
  if (fs::exists(meta))
    raise(errc::workspace_exists, "workspace already exists at " + dir.string());
  fs::create_directories(meta / "objects");
  fs::create_directories(meta / "datasets");
  write_file_atomic(meta / "config", "odf-workspace 1\n");
  write_file_atomic(meta / "names", "");
  return workspace(fs::absolute(dir).lexically_normal());
}

workspace workspace::open(const fs::path& dir) {
  fs::path root = fs::absolute(dir).lexically_normal();
  if (!fs::is_directory(root / ".odf"))
    raise(errc::workspace_not_found, "no workspace at " + dir.string());
  auto cfg = read_file(root / ".odf" / "config");
  if (!cfg || cfg->rfind("odf-workspace 1", 0) != 0)
    raise(errc::workspace_not_found,
          "unrecognized workspace format at " + dir.string());
  return workspace(root);
}

std::map<std::string, object_hash> workspace::names() const {
  std::map<std::string, object_hash> reg;
  auto text = read_file(meta() / "names");
  if (!text) return reg;
  std::istringstream in(*text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto sp = line.find(' ');
    if (sp == std::string::npos || !is_object_hash(line.substr(0, sp)))
      raise(errc::io_failure, "names registry is malformed");
    reg.emplace(line.substr(sp + 1), line.substr(0, sp));
  }
  return reg;
}

void workspace::save_names(const std::map<std::string, object_hash>& reg) {
  std::string out;
  for (const auto& [name, id] : reg) out += id + " " + name + "\n";
  write_file_atomic(meta() / "names", out);
}

std::optional<object_hash> workspace::id_of(const std::string& name) const {
  auto reg = names();
  auto it = reg.find(name);
  if (it == reg.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> workspace::name_of(const object_hash& id) const {
  for (const auto& [name, did] : names())
    if (did == id) return name;
  return std::nullopt;
}

object_hash workspace::resolve(const std::string& name_or_id) const {
  if (auto id = id_of(name_or_id)) return *id;
  if (is_object_hash(name_or_id) && has_dataset(name_or_id)) return name_or_id;
  raise(errc::unknown_dataset, "unknown dataset '" + name_or_id + "'");
}

std::vector<object_hash> workspace::dataset_ids() const {
  std::vector<object_hash> out;
  fs::path dir = meta() / "datasets";
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string base = e.path().filename().string();
    if (is_object_hash(base) && fs::exists(e.path() / "head"))
      out.push_back(base);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool workspace::has_dataset(const object_hash& id) const {
  return fs::exists(dataset_dir(id) / "head");
}

std::optional<object_hash> workspace::head(const object_hash& id) const {
  auto text = read_file(dataset_dir(id) / "head");
  if (!text) return std::nullopt;
  while (!text->empty() && (text->back() == '\n' || text->back() == '\r'))
    text->pop_back();
  if (!is_object_hash(*text))
    raise(errc::io_failure, "head file for " + id + " is malformed");
  return *text;
}

void workspace::set_head(const object_hash& id, const object_hash& h) {
  fs::create_directories(dataset_dir(id));  // first head adopts the dataset
  write_file_atomic(dataset_dir(id) / "head", h + "\n");
}

loaded_chain workspace::chain_of(const object_hash& id) const {
  auto h = head(id);
  if (!h) raise(errc::unknown_dataset, "no dataset with id " + id);
  loaded_chain chain = load_chain(store_, *h);
  if (chain.dataset_id() != id)
    raise(errc::invalid_chain,
          "head of " + id + " belongs to a different dataset");
  return chain;
}

std::optional<fs::path> workspace::source_path(const object_hash& id) const {
  auto text = read_file(dataset_dir(id) / "source");
  if (!text) return std::nullopt;
  while (!text->empty() && (text->back() == '\n' || text->back() == '\r'))
    text->pop_back();
  fs::path p(*text);
  if (p.is_relative()) p = root_ / p;
  return p;
}

void workspace::set_source_path(const object_hash& id, const std::string& p) {
  write_file_atomic(dataset_dir(id) / "source", p + "\n");
}

void workspace::bind_name(const std::string& name, const object_hash& id) {
  if (!is_dataset_name(name))
    raise(errc::manifest_invalid, "'" + name + "' is not a valid dataset name");
  file_lock guard(meta() / "lock");
  auto reg = names();
  auto it = reg.find(name);
  if (it != reg.end() && it->second != id)
    raise(errc::name_conflict,
          "name '" + name + "' is already bound to another dataset");
  reg[name] = id;
  save_names(reg);
}

file_lock workspace::lock_dataset(const object_hash& id) const {
  return file_lock(dataset_dir(id) / "lock");
}

loaded_chain chain_prefix(const loaded_chain& c, size_t block_count) {
  if (block_count == 0 || block_count > c.size())
    raise(errc::invalid_block, "chain prefix out of range");
  loaded_chain out;
  out.blocks.assign(c.blocks.begin(), c.blocks.begin() + block_count);
  return out;
}

namespace {

std::vector<std::string> query_table_names(const dsl::ast::query& q) {
  std::vector<std::string> names{q.from.table};
  if (q.join) names.push_back(q.join->right.table);
  return names;
}

schema_def schema_rec(const workspace& ws, const loaded_chain& chain,
                      std::set<object_hash>& visiting) {
  if (chain.kind() == dataset_kind::root) {
    const auto* src = chain.current_source();
    if (!src)
      raise(errc::invalid_event_sequence,
            "root dataset has no source configured");
    return src->source.schema;
  }
  const auto* t = chain.current_transform();
  if (!t)
    raise(errc::invalid_event_sequence,
          "derivative dataset has no transform configured");
  if (!visiting.insert(chain.dataset_id()).second)
    raise(errc::cycle_detected, "dataset graph contains a cycle");
  dsl::ast::query q = dsl::parse(t->query);
  std::vector<std::string> tables = query_table_names(q);
  std::map<std::string, schema_def> schemas;
  for (size_t i = 0; i < tables.size(); i++) {
    loaded_chain in = ws.chain_of(t->inputs[i]);
    schemas.emplace(tables[i], schema_rec(ws, in, visiting));
  }
  visiting.erase(chain.dataset_id());
  return dsl::analyze(q, schemas).output_schema;
}

}  // namespace

schema_def dataset_schema(const workspace& ws, const loaded_chain& chain) {
  std::set<object_hash> visiting;
  return schema_rec(ws, chain, visiting);
}

dsl::typed_plan make_plan(const workspace& ws, const set_transform_event& t,
                          const std::vector<loaded_chain>& input_prefixes) {
  dsl::ast::query q = dsl::parse(t.query);
  std::vector<std::string> tables = query_table_names(q);
  if (tables.size() != input_prefixes.size() ||
      tables.size() != t.inputs.size())
    raise(errc::invalid_block,
          "transform input count does not match its query");
  std::map<std::string, schema_def> schemas;
  for (size_t i = 0; i < tables.size(); i++)
    schemas.emplace(tables[i], dataset_schema(ws, input_prefixes[i]));
  return dsl::analyze(q, schemas);
}

std::vector<record> read_input_records(const object_store& store,
                                       const loaded_chain& prefix,
                                       uint64_t offset_start,
                                       uint64_t offset_end) {
  if (prefix.kind() == dataset_kind::root)
    return read_root_records(store, prefix, offset_start, offset_end);
  return read_records_generic(store, prefix, offset_start, offset_end);
}

namespace {

bool reaches(const workspace& ws, const object_hash& from,
             const object_hash& target, std::set<object_hash>& seen) {
  if (from == target) return true;
  if (!seen.insert(from).second) return false;
  if (!ws.has_dataset(from)) return false;
  loaded_chain c = ws.chain_of(from);
  if (const auto* t = c.current_transform())
    for (const auto& in : t->inputs)
      if (reaches(ws, in, target, seen)) return true;
  return false;
}

}  // namespace

add_outcome workspace::add_dataset(const dataset_manifest& m,
                                   int64_t system_time) {
  const std::string& name = manifest_name(m);
  std::optional<object_hash> existing = id_of(name);

  // Build the lifecycle event the manifest describes.
  metadata_event event;
  std::optional<std::string> src_path;
  if (const auto* r = std::get_if<root_manifest>(&m)) {
    event = set_polling_source_event{r->source};
    src_path = r->source_path;
  } else {
    const auto& d = std::get<derivative_manifest>(m);
    if (d.engine && *d.engine != engine::builtin_engine_version().name)
      raise(errc::engine_version_unavailable,
            "engine '" + *d.engine + "' is not available");
    dsl::ast::query q = dsl::parse(d.query);
    std::vector<std::string> tables = query_table_names(q);
    std::set<std::string> declared(d.inputs.begin(), d.inputs.end());
    for (const auto& t : tables)
      if (!declared.erase(t))
        raise(errc::manifest_invalid,
              "query reads '" + t + "' which is not listed in inputs");
    if (!declared.empty())
      raise(errc::manifest_invalid, "inputs: '" + *declared.begin() +
                                        "' is not read by the query");
    set_transform_event st;
    st.query = d.query;
    st.engine = engine::builtin_engine_version();
    std::map<std::string, schema_def> schemas;
    for (const auto& t : tables) {
      auto id = id_of(t);
      if (!id) raise(errc::unknown_dataset, "unknown input dataset '" + t + "'");
      st.inputs.push_back(*id);
      schemas.emplace(t, dataset_schema(*this, chain_of(*id)));
      if (existing) {
        std::set<object_hash> seen;
        if (reaches(*this, *id, *existing, seen))
          raise(errc::cycle_detected,
                "'" + t + "' already depends on '" + name + "'");
      }
    }
    (void)dsl::analyze(q, schemas);  // the query must bind against its inputs
    event = std::move(st);
  }

  add_outcome out;
  if (existing) {
    out.id = *existing;
    file_lock guard = lock_dataset(out.id);
    loaded_chain chain = chain_of(out.id);
    bool same = false;
    if (const auto* sps = std::get_if<set_polling_source_event>(&event)) {
      if (chain.kind() != dataset_kind::root)
        raise(errc::manifest_invalid,
              "'" + name + "' already exists as a derivative dataset");
      same = chain.current_source() && *chain.current_source() == *sps;
    } else {
      if (chain.kind() != dataset_kind::derivative)
        raise(errc::manifest_invalid,
              "'" + name + "' already exists as a root dataset");
      const auto& st = std::get<set_transform_event>(event);
      same = chain.current_transform() && *chain.current_transform() == st;
    }
    if (!same) {
      metadata_block b = make_next_block(&chain, std::move(event), system_time);
      store_block(store_, b);
      set_head(out.id, hash_block(b));
      out.updated = true;
    }
  } else {
    dataset_kind kind = std::holds_alternative<root_manifest>(m)
                            ? dataset_kind::root
                            : dataset_kind::derivative;
    metadata_block seed =
        make_next_block(nullptr, seed_event{kind, name}, system_time);
    object_hash id = store_block(store_, seed);
    loaded_chain chain;
    chain.blocks.push_back({seed, id});
    metadata_block b = make_next_block(&chain, std::move(event), system_time);
    store_block(store_, b);
    out.id = id;
    out.created = true;
    fs::create_directories(dataset_dir(id));
    set_head(id, hash_block(b));
    bind_name(name, id);
  }
  if (src_path) set_source_path(out.id, *src_path);
  return out;
}

}  // namespace odf
