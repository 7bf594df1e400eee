#include "coordinator/manifest.hpp"

#include <yaml-cpp/yaml.h>

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "core/errors.hpp"
#include "core/util.hpp"

namespace odf {

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
  raise(errc::manifest_invalid, path + ": " + msg);
}

std::string join_path(const std::string& a, const std::string& b) {
  return a.empty() ? b : a + "." + b;
}

void require_map(const YAML::Node& n, const std::string& path) {
  if (!n || !n.IsMap()) bad(path, "expected a mapping");
}

// Unknown keys are almost always typos; refuse them loudly.
void check_keys(const YAML::Node& n, const std::string& path,
                const std::set<std::string>& allowed) {
  for (const auto& kv : n) {
    std::string key;
    try {
      key = kv.first.as<std::string>();
    } catch (const YAML::Exception&) {
      bad(path, "keys must be plain strings");
    }
    if (!allowed.count(key)) bad(join_path(path, key), "unknown field");
  }
}

std::string want_string(const YAML::Node& n, const std::string& path,
                        const char* key) {
  YAML::Node f = n[key];
  if (!f) bad(join_path(path, key), "missing required field");
  if (!f.IsScalar()) bad(join_path(path, key), "expected a string");
  return f.as<std::string>();
}

// "4 days", "90 seconds", "1 week" or a bare millisecond count.
int64_t parse_duration(const std::string& text, const std::string& path) {
  std::istringstream in(text);
  int64_t n = 0;
  std::string unit;
  if (!(in >> n) || n < 0) bad(path, "expected a nonnegative duration");
  if (!(in >> unit)) return n;  // bare integer: milliseconds
  std::string tail;
  if (in >> tail) bad(path, "trailing text after duration");
  if (!unit.empty() && unit.back() == 's' && unit != "s" && unit != "ms")
    unit.pop_back();
  int64_t scale;
  if (unit == "ms" || unit == "millisecond") scale = 1;
  else if (unit == "second") scale = 1000;
  else if (unit == "minute") scale = 60 * 1000;
  else if (unit == "hour") scale = 3600 * 1000;
  else if (unit == "day") scale = 86400LL * 1000;
  else if (unit == "week") scale = 7 * 86400LL * 1000;
  else bad(path, "unknown duration unit '" + unit + "'");
  int64_t out;
  if (!checked_mul(n, scale, out)) bad(path, "duration is too large");
  return out;
}

schema_def parse_schema(const YAML::Node& n, const std::string& path) {
  if (!n || !n.IsSequence()) bad(path, "expected a list of columns");
  if (n.size() == 0) bad(path, "schema cannot be empty");
  schema_def schema;
  for (size_t i = 0; i < n.size(); i++) {
    std::string cpath = path + "[" + std::to_string(i) + "]";
    const YAML::Node& c = n[i];
    require_map(c, cpath);
    check_keys(c, cpath, {"name", "type", "nullable"});
    column_def col;
    col.name = want_string(c, cpath, "name");
    if (!is_identifier(col.name))
      bad(join_path(cpath, "name"), "not a valid column name");
    if (is_reserved_column_name(col.name))
      bad(join_path(cpath, "name"),
          "'" + col.name + "' is reserved for the record envelope");
    std::string tname = want_string(c, cpath, "type");
    auto t = column_type_from_name(tname);
    if (!t) bad(join_path(cpath, "type"), "unknown column type '" + tname + "'");
    col.type = *t;
    if (YAML::Node nl = c["nullable"]) {
      if (!nl.IsScalar()) bad(join_path(cpath, "nullable"), "expected a bool");
      try {
        col.nullable = nl.as<bool>();
      } catch (const YAML::Exception&) {
        bad(join_path(cpath, "nullable"), "expected a bool");
      }
    }
    if (schema.find(col.name))
      bad(join_path(cpath, "name"), "duplicate column '" + col.name + "'");
    schema.columns.push_back(std::move(col));
  }
  return schema;
}

merge_strategy parse_merge(const YAML::Node& n, const std::string& path) {
  require_map(n, path);
  check_keys(n, path, {"kind", "primary_key"});
  merge_strategy merge;
  std::string kname = want_string(n, path, "kind");
  auto k = merge_kind_from_name(kname);
  if (!k) bad(join_path(path, "kind"), "unknown merge kind '" + kname + "'");
  merge.kind = *k;
  // Both kinds are keyed: ledger merges dedup by key, snapshot merges diff
  // by key.
  YAML::Node pk = n["primary_key"];
  if (!pk || !pk.IsSequence() || pk.size() == 0)
    bad(join_path(path, "primary_key"), "expected a non-empty column list");
  for (size_t i = 0; i < pk.size(); i++) {
    if (!pk[i].IsScalar())
      bad(join_path(path, "primary_key"), "expected column names");
    merge.primary_key.push_back(pk[i].as<std::string>());
  }
  return merge;
}

root_manifest parse_root(const YAML::Node& top, std::string name) {
  check_keys(top, "", {"name", "kind", "source"});
  YAML::Node src = top["source"];
  require_map(src, "source");
  check_keys(src, "source",
             {"path", "format", "event_time_column", "schema", "merge",
              "allowed_lateness"});
  root_manifest m;
  m.name = std::move(name);
  m.source_path = want_string(src, "source", "path");
  if (m.source_path.empty()) bad("source.path", "cannot be empty");

  std::string fname = want_string(src, "source", "format");
  auto f = source_format_from_name(fname);
  if (!f) bad("source.format", "unknown format '" + fname + "'");
  m.source.format = *f;

  m.source.schema = parse_schema(src["schema"], "source.schema");
  m.source.merge = parse_merge(src["merge"], "source.merge");

  YAML::Node etc = src["event_time_column"];
  if (m.source.merge.kind == merge_kind::ledger) {
    m.source.event_time_column = want_string(src, "source", "event_time_column");
  } else if (etc) {
    bad("source.event_time_column",
        "snapshot sources take their event time from the observation time");
  }

  if (YAML::Node al = src["allowed_lateness"]) {
    if (!al.IsScalar()) bad("source.allowed_lateness", "expected a duration");
    m.source.allowed_lateness_ms =
        parse_duration(al.as<std::string>(), "source.allowed_lateness");
  }

  try {
    validate_polling_source(m.source);
  } catch (const error& e) {
    bad("source", e.what());
  }
  return m;
}

derivative_manifest parse_derivative(const YAML::Node& top, std::string name) {
  check_keys(top, "", {"name", "kind", "inputs", "query", "engine"});
  derivative_manifest m;
  m.name = std::move(name);

  YAML::Node in = top["inputs"];
  if (!in || !in.IsSequence() || in.size() == 0)
    bad("inputs", "expected a non-empty list of dataset names");
  std::set<std::string> seen;
  for (size_t i = 0; i < in.size(); i++) {
    if (!in[i].IsScalar()) bad("inputs", "expected dataset names");
    std::string s = in[i].as<std::string>();
    if (!is_dataset_name(s))
      bad("inputs[" + std::to_string(i) + "]", "not a valid dataset name");
    if (!seen.insert(s).second)
      bad("inputs[" + std::to_string(i) + "]", "duplicate input '" + s + "'");
    m.inputs.push_back(std::move(s));
  }

  m.query = want_string(top, "", "query");
  while (!m.query.empty() && std::isspace((unsigned char)m.query.back()))
    m.query.pop_back();
  if (m.query.empty()) bad("query", "cannot be empty");

  if (YAML::Node eng = top["engine"]) {
    if (!eng.IsScalar()) bad("engine", "expected an engine name");
    m.engine = eng.as<std::string>();
  }
  return m;
}

}  // namespace

bool is_dataset_name(std::string_view s) {
  if (s.empty() || s.size() > 128) return false;
  if (!std::isalnum((unsigned char)s[0])) return false;
  for (char c : s)
    if (!std::isalnum((unsigned char)c) && c != '_' && c != '-' && c != '.')
      return false;
  return true;
}

const std::string& manifest_name(const dataset_manifest& m) {
  if (const auto* r = std::get_if<root_manifest>(&m)) return r->name;
  return std::get<derivative_manifest>(m).name;
}

dataset_manifest parse_manifest(const std::string& yaml_text) {
  YAML::Node top;
  try {
    top = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    raise(errc::manifest_invalid, std::string("not valid YAML: ") + e.what());
  }
  require_map(top, "");
  std::string name = want_string(top, "", "name");
  if (!is_dataset_name(name)) bad("name", "not a valid dataset name");
  std::string kind = want_string(top, "", "kind");
  if (kind == "root") return parse_root(top, std::move(name));
  if (kind == "derivative") return parse_derivative(top, std::move(name));
  bad("kind", "expected 'root' or 'derivative'");
}

dataset_manifest load_manifest(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) raise(errc::io_failure, "cannot read " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str());
}

}  // namespace odf
