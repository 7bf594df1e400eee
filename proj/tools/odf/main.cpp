// Command line front end. Links the C API only; all ledger logic lives
// behind it.

#include <odf/odf.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace {

const char* k_usage = R"(usage: odf [--output text|json] <command> [args]

commands:
  init                               create a workspace in the current directory
  add <manifest.yaml>                register or update a dataset
  ingest <name> [--source <path>]    one polling round for a root dataset
  pull <name>                        refresh a dataset and its inputs
  log <name>                         show the metadata chain
  verify <name> [--integrity-only]   audit hashes; replay transforms
  lineage <name>                     transitive input graph
  trace <name> <offset>              provenance of one output record
  project <name> [--as-of <time>]    state as of now or a past system time
  set-watermark <name> <time>        advance a root dataset's watermark
  push <name> <repo>                 publish to a repository directory
  pull-remote <name|id> <repo>       fetch from a repository directory
  tail <name> [-n <k>]               newest k records (default 10)

times are RFC 3339 UTC, e.g. 2024-05-01T12:00:00Z. Exit codes: 0 ok,
1 user error, 2 verification failure, 3 I/O failure.

environment:
  ODF_WORKSPACE     workspace directory (default: nearest ancestor with .odf)
  ODF_SYSTEM_TIME   fixed system time for new blocks (default: wall clock)
)";

int usage_error(const std::string& msg) {
  std::fprintf(stderr, "odf: %s\n%s", msg.c_str(), k_usage);
  return ODF_E_USER;
}

// Minimal JSON string escaping for the one document the CLI emits itself.
std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (unsigned char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += static_cast<char>(c);
    } else if (c < 0x20) {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\u%04x", c);
      out += buf;
    } else {
      out += static_cast<char>(c);
    }
  }
  return out + "\"";
}

int64_t now_ms_from_env_or_clock() {
  if (const char* fixed = std::getenv("ODF_SYSTEM_TIME")) {
    int64_t ms = 0;
    if (odf_parse_time(fixed, &ms) != ODF_OK) {
      std::fprintf(stderr, "odf: ODF_SYSTEM_TIME: %s\n", odf_last_error());
      std::exit(ODF_E_USER);
    }
    return ms;
  }
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch())
      .count();
}

struct args {
  std::string command;
  std::vector<std::string> positional;
  bool json = false;
  bool integrity_only = false;
  std::string source;       // --source
  std::string as_of;        // --as-of
  long long tail_n = 10;    // -n
  bool has_source = false;
  bool has_as_of = false;
};

int parse_args(int argc, char** argv, args& a) {
  std::vector<std::string> raw(argv + 1, argv + argc);
  for (size_t i = 0; i < raw.size(); i++) {
    const std::string& s = raw[i];
    auto next = [&](const char* flag) -> const std::string* {
      if (i + 1 >= raw.size()) return nullptr;
      (void)flag;
      return &raw[++i];
    };
    if (s == "-h" || s == "--help") {
      std::fputs(k_usage, stdout);
      std::exit(ODF_OK);
    } else if (s == "--output") {
      const std::string* v = next("--output");
      if (!v) return usage_error("--output needs a value");
      if (*v == "json")
        a.json = true;
      else if (*v == "text")
        a.json = false;
      else
        return usage_error("--output must be text or json");
    } else if (s == "--integrity-only") {
      a.integrity_only = true;
    } else if (s == "--source") {
      const std::string* v = next("--source");
      if (!v) return usage_error("--source needs a path");
      a.source = *v;
      a.has_source = true;
    } else if (s == "--as-of") {
      const std::string* v = next("--as-of");
      if (!v) return usage_error("--as-of needs a timestamp");
      a.as_of = *v;
      a.has_as_of = true;
    } else if (s == "-n") {
      const std::string* v = next("-n");
      if (!v) return usage_error("-n needs a count");
      char* end = nullptr;
      a.tail_n = std::strtoll(v->c_str(), &end, 10);
      if (!end || *end != '\0' || a.tail_n < 0)
        return usage_error("-n needs a non-negative integer");
    } else if (!s.empty() && s[0] == '-') {
      return usage_error("unknown flag " + s);
    } else if (a.command.empty()) {
      a.command = s;
    } else {
      a.positional.push_back(s);
    }
  }
  if (a.command.empty()) return usage_error("no command");
  return -1;  // parsed fine
}

int finish(int status, char* out) {
  if (out) {
    std::fputs(out, stdout);
    odf_string_free(out);
  }
  if (status != ODF_OK && odf_last_error()[0] != '\0')
    std::fprintf(stderr, "odf: %s\n", odf_last_error());
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  args a;
  int rc = parse_args(argc, argv, a);
  if (rc >= 0) return rc;

  std::string cwd = std::filesystem::current_path().string();
  int render = a.json ? ODF_RENDER_JSON : ODF_RENDER_TEXT;

  auto want = [&](size_t n, const char* shape) -> bool {
    if (a.positional.size() == n) return true;
    usage_error(std::string("usage: odf ") + shape);
    return false;
  };

  if (a.command == "init") {
    if (!want(0, "init")) return ODF_E_USER;
    odf_workspace* ws = nullptr;
    int status = odf_workspace_init(cwd.c_str(), &ws);
    if (status != ODF_OK) return finish(status, nullptr);
    if (a.json)
      std::printf("{\"root\":%s}\n", json_string(odf_workspace_root(ws)).c_str());
    else
      std::printf("initialized workspace at %s\n", odf_workspace_root(ws));
    odf_workspace_close(ws);
    return ODF_OK;
  }

  odf_workspace* ws = nullptr;
  int status = odf_workspace_open(cwd.c_str(), &ws);
  if (status != ODF_OK) return finish(status, nullptr);

  int64_t now = now_ms_from_env_or_clock();
  char* out = nullptr;

  if (a.command == "add") {
    if (want(1, "add <manifest.yaml>"))
      status = odf_add(ws, a.positional[0].c_str(), now, render, &out);
    else
      status = ODF_E_USER;
  } else if (a.command == "ingest") {
    if (want(1, "ingest <name> [--source <path>]"))
      status = odf_ingest(ws, a.positional[0].c_str(),
                          a.has_source ? a.source.c_str() : nullptr, now,
                          render, &out);
    else
      status = ODF_E_USER;
  } else if (a.command == "pull") {
    if (want(1, "pull <name>"))
      status = odf_pull(ws, a.positional[0].c_str(), now, render, &out);
    else
      status = ODF_E_USER;
  } else if (a.command == "log") {
    if (want(1, "log <name>"))
      status = odf_log(ws, a.positional[0].c_str(), render, &out);
    else
      status = ODF_E_USER;
  } else if (a.command == "verify") {
    if (want(1, "verify <name> [--integrity-only]"))
      status = odf_verify(ws, a.positional[0].c_str(),
                          a.integrity_only ? 1 : 0, render, &out);
    else
      status = ODF_E_USER;
  } else if (a.command == "lineage") {
    if (want(1, "lineage <name>"))
      status = odf_lineage(ws, a.positional[0].c_str(), render, &out);
    else
      status = ODF_E_USER;
  } else if (a.command == "trace") {
    if (want(2, "trace <name> <offset>")) {
      char* end = nullptr;
      long long off = std::strtoll(a.positional[1].c_str(), &end, 10);
      if (!end || *end != '\0' || off < 0)
        status = usage_error("trace: offset must be a non-negative integer");
      else
        status = odf_trace(ws, a.positional[0].c_str(), off, render, &out);
    } else {
      status = ODF_E_USER;
    }
  } else if (a.command == "project") {
    if (want(1, "project <name> [--as-of <time>]"))
      status = odf_project(ws, a.positional[0].c_str(),
                           a.has_as_of ? a.as_of.c_str() : nullptr, render,
                           &out);
    else
      status = ODF_E_USER;
  } else if (a.command == "set-watermark") {
    if (want(2, "set-watermark <name> <time>"))
      status = odf_set_watermark(ws, a.positional[0].c_str(),
                                 a.positional[1].c_str(), now, render, &out);
    else
      status = ODF_E_USER;
  } else if (a.command == "push") {
    if (want(2, "push <name> <repo>"))
      status = odf_push(ws, a.positional[0].c_str(), a.positional[1].c_str(),
                        render, &out);
    else
      status = ODF_E_USER;
  } else if (a.command == "pull-remote") {
    if (want(2, "pull-remote <name|id> <repo>"))
      status = odf_pull_remote(ws, a.positional[0].c_str(),
                               a.positional[1].c_str(), render, &out);
    else
      status = ODF_E_USER;
  } else if (a.command == "tail") {
    if (want(1, "tail <name> [-n <k>]"))
      status = odf_tail(ws, a.positional[0].c_str(), a.tail_n, render, &out);
    else
      status = ODF_E_USER;
  } else {
    status = usage_error("unknown command " + a.command);
  }

  int rc2 = finish(status, out);
  odf_workspace_close(ws);
  return rc2;
}
