#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "coordinator/coordinator.hpp"
#include "coordinator/manifest.hpp"
#include "coordinator/repo_sync.hpp"
#include "core/errors.hpp"

using namespace odf;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() /
           ("odf_sync_test_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

constexpr int64_t k_jan1 = 1577836800000;
constexpr int64_t k_sys0 = 1640995200000;
constexpr int64_t k_hour = 3600000;

std::string ts(int64_t ms) {
  std::string quoted = canonical_encode(value::time_ms(ms));
  return quoted.substr(1, quoted.size() - 2);
}

struct site {
  fs::path dir;
  workspace ws;
  int64_t clock = k_sys0;

  explicit site(const std::string& tag)
      : dir(fresh_dir(tag)), ws(workspace::init(dir)) {}

  int64_t tick() { return clock += k_hour; }

  void write(const std::string& rel, const std::string& text) {
    std::ofstream out(dir / rel, std::ios::binary | std::ios::trunc);
    out << text;
  }

  object_hash add(const std::string& yaml) {
    return ws.add_dataset(parse_manifest(yaml), tick()).id;
  }
};

const char* k_orders_manifest = R"(
name: orders
kind: root
source:
  path: orders.csv
  format: csv
  event_time_column: placed_at
  schema:
    - {name: order_id, type: int64}
    - {name: qty, type: int64}
    - {name: placed_at, type: timestamp}
  merge:
    kind: ledger
    primary_key: [order_id]
  allowed_lateness: 0
)";

const char* k_big_orders_manifest = R"(
name: big_orders
kind: derivative
inputs: [orders]
query: SELECT order_id, qty FROM orders WHERE qty >= 3
)";

std::string orders_csv(int rows) {
  std::string text = "order_id,qty,placed_at\n";
  for (int i = 1; i <= rows; i++)
    text += std::to_string(i) + "," + std::to_string(i * 2) + "," +
            ts(k_jan1 + i * k_hour) + "\n";
  return text;
}

fs::path repo_object_path(const fs::path& repo, const object_hash& h) {
  return repo / "objects" / h.substr(0, 2) / h.substr(2);
}

std::set<object_hash> repo_objects(const fs::path& repo) {
  std::set<object_hash> out;
  for (const auto& e : fs::recursive_directory_iterator(repo / "objects"))
    if (e.is_regular_file())
      out.insert(e.path().parent_path().filename().string() +
                 e.path().filename().string());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void stomp(const fs::path& p, std::string bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

// a publisher workspace with orders ingested and big_orders transformed
struct publisher : site {
  object_hash orders;
  object_hash big;

  explicit publisher(const std::string& tag, int rows = 3) : site(tag) {
    write("orders.csv", orders_csv(rows));
    orders = add(k_orders_manifest);
    big = add(k_big_orders_manifest);
    pull_report rep = pull(ws, big, tick());
    REQUIRE(rep.ok);
  }
};

}  // namespace

TEST_CASE("push then pull reproduces byte-identical object sets") {
  publisher a("rt_a");
  fs::path repo = fresh_dir("rt_repo");

  transfer_report up = push(a.ws, a.orders, repo);
  CHECK(up.updated);
  CHECK(up.ref_created);
  CHECK(up.head == a.ws.chain_of(a.orders).head());
  CHECK(up.blocks_transferred == 3);     // seed, source, data
  CHECK(up.objects_transferred == 4);    // blocks + one slice
  transfer_report up2 = push(a.ws, a.big, repo);
  CHECK(up2.objects_transferred == 5);   // 3 blocks + slice + checkpoint

  // idempotent: nothing moves twice
  transfer_report again = push(a.ws, a.orders, repo);
  CHECK_FALSE(again.updated);
  CHECK(again.objects_transferred == 0);

  site b("rt_b");
  transfer_report down = pull_remote(b.ws, a.orders, repo);
  CHECK(down.updated);
  CHECK(down.ref_created);
  CHECK(down.objects_transferred == 4);
  transfer_report down2 = pull_remote(b.ws, a.big, repo);
  CHECK(down2.objects_transferred == 5);

  CHECK(b.ws.head(a.orders) == a.ws.head(a.orders));
  CHECK(b.ws.head(a.big) == a.ws.head(a.big));
  CHECK(b.ws.id_of("orders") == a.orders);
  CHECK(b.ws.id_of("big_orders") == a.big);

  // every repo object reads back identical bytes at both sites
  for (const object_hash& h : repo_objects(repo)) {
    CHECK(a.ws.store().get(h) == b.ws.store().get(h));
    CHECK(slurp(repo_object_path(repo, h)) == a.ws.store().get(h));
  }

  CHECK(verify_integrity(b.ws, a.big, true).valid);
  CHECK(verify_reproducibility(b.ws, a.big, true).ok);
  CHECK(tail_records(b.ws, a.big, 100).size() ==
        tail_records(a.ws, a.big, 100).size());

  // the source file did not travel, only the ledger; pulling at b is a no-op
  pull_report local = pull(b.ws, a.big, b.tick());
  CHECK(local.ok);
  CHECK(local.actions[0].detail == "no polling source configured");

  // pulling an id the repo never heard of fails cleanly
  CHECK_THROWS_WITH_AS(pull_remote(b.ws, sha256_hex("nope"), repo),
                       doctest::Contains("RepoUnavailable"), error);
  CHECK_THROWS_WITH_AS(pull_remote(b.ws, a.orders, fresh_dir("empty")),
                       doctest::Contains("RepoUnavailable"), error);
}

TEST_CASE("incremental sync moves exactly the delta") {
  publisher a("inc_a");
  fs::path repo = fresh_dir("inc_repo");
  push(a.ws, a.orders, repo);

  site b("inc_b");
  pull_remote(b.ws, a.orders, repo);

  // two new blocks at the publisher: a watermark bump and a data round
  set_watermark(a.ws, a.orders, k_jan1 + 10 * k_hour, a.tick());
  a.write("orders.csv", orders_csv(4));
  ingest_dataset(a.ws, a.orders, std::nullopt, a.tick());

  transfer_report up = push(a.ws, a.orders, repo);
  CHECK(up.blocks_transferred == 2);
  CHECK(up.objects_transferred == 3);  // 2 blocks + 1 new slice

  transfer_report down = pull_remote(b.ws, a.orders, repo);
  CHECK(down.updated);
  CHECK_FALSE(down.ref_created);
  CHECK(down.blocks_transferred == 2);
  CHECK(down.objects_transferred == 3);
  CHECK(b.ws.head(a.orders) == a.ws.head(a.orders));

  // already in sync: both directions are no-ops
  CHECK_FALSE(push(a.ws, a.orders, repo).updated);
  CHECK_FALSE(pull_remote(b.ws, a.orders, repo).updated);
}

TEST_CASE("divergent histories are refused in both directions") {
  publisher a("div_a");
  fs::path repo = fresh_dir("div_repo");
  push(a.ws, a.orders, repo);

  site c("div_c");
  pull_remote(c.ws, a.orders, repo);
  c.clock = a.clock;  // adopted blocks carry the publisher's clock

  // both sites extend the dataset differently
  a.write("orders.csv", orders_csv(4));
  ingest_dataset(a.ws, a.orders, std::nullopt, a.tick());
  push(a.ws, a.orders, repo);

  c.write("mine.csv",
          "order_id,qty,placed_at\n99,1," + ts(k_jan1 + 9 * k_hour) + "\n");
  ingest_dataset(c.ws, a.orders, c.dir / "mine.csv", c.tick());

  object_hash c_head = *c.ws.head(a.orders);
  CHECK_THROWS_WITH_AS(push(c.ws, a.orders, repo),
                       doctest::Contains("NonFastForward"), error);
  CHECK_THROWS_WITH_AS(pull_remote(c.ws, a.orders, repo),
                       doctest::Contains("NonFastForward"), error);
  // nothing moved on either side
  CHECK(*c.ws.head(a.orders) == c_head);
  CHECK(slurp(repo / "refs" / a.orders) ==
        a.ws.chain_of(a.orders).head() + "\n");

  // a site that is merely ahead is fine in both directions
  site d("div_d");
  pull_remote(d.ws, a.orders, repo);
  d.clock = a.clock;
  d.write("more.csv", orders_csv(5));
  ingest_dataset(d.ws, a.orders, d.dir / "more.csv", d.tick());
  transfer_report noop = pull_remote(d.ws, a.orders, repo);
  CHECK_FALSE(noop.updated);
  CHECK(noop.head == *d.ws.head(a.orders));
  transfer_report ff = push(d.ws, a.orders, repo);
  CHECK(ff.updated);
  CHECK(slurp(repo / "refs" / a.orders) == ff.head + "\n");
}

TEST_CASE("a tampered repository is rejected with local state unchanged") {
  publisher a("tam_a");
  fs::path repo = fresh_dir("tam_repo");
  push(a.ws, a.orders, repo);

  site b("tam_b");
  pull_remote(b.ws, a.orders, repo);
  object_hash adopted = *b.ws.head(a.orders);

  // grow the remote by one data round, then corrupt it in various ways
  a.write("orders.csv", orders_csv(4));
  ingest_dataset(a.ws, a.orders, std::nullopt, a.tick());
  push(a.ws, a.orders, repo);

  loaded_chain ac = a.ws.chain_of(a.orders);
  const auto& add = std::get<add_data_event>(ac.blocks.back().block.event);
  fs::path slice_obj = repo_object_path(repo, add.output_slice->slice_hash);
  fs::path block_obj = repo_object_path(repo, ac.head());

  auto expect_rejected = [&](const char* needle) {
    CHECK_THROWS_WITH_AS(pull_remote(b.ws, a.orders, repo),
                         doctest::Contains(needle), error);
    CHECK(*b.ws.head(a.orders) == adopted);  // head never moved
  };

  std::string good_slice = slurp(slice_obj);
  std::string bad_slice = good_slice;
  bad_slice[bad_slice.size() / 2] ^= 0x01;
  stomp(slice_obj, bad_slice);
  expect_rejected("InvalidChain");
  stomp(slice_obj, good_slice);

  fs::remove(slice_obj);
  expect_rejected("ObjectMissingInRepo");
  stomp(slice_obj, good_slice);

  std::string good_block = slurp(block_obj);
  std::string bad_block = good_block;
  bad_block[0] ^= 0x01;
  stomp(block_obj, bad_block);
  expect_rejected("InvalidChain");
  stomp(block_obj, good_block);

  fs::remove(block_obj);
  expect_rejected("ObjectMissingInRepo");
  stomp(block_obj, good_block);

  stomp(repo / "refs" / a.orders, "not a hash\n");
  expect_rejected("InvalidChain");
  stomp(repo / "refs" / a.orders, ac.head() + "\n");

  // intact again: the pull goes through
  transfer_report ok = pull_remote(b.ws, a.orders, repo);
  CHECK(ok.updated);
  CHECK(*b.ws.head(a.orders) == ac.head());
}

TEST_CASE("repositories may drop checkpoints; consumers recompute them") {
  publisher a("ckpt_a");
  fs::path repo = fresh_dir("ckpt_repo");
  push(a.ws, a.orders, repo);
  push(a.ws, a.big, repo);

  loaded_chain bc = a.ws.chain_of(a.big);
  const auto& et =
      std::get<execute_transform_event>(bc.blocks.back().block.event);
  fs::remove(repo_object_path(repo, *et.new_checkpoint));

  site b("ckpt_b");
  pull_remote(b.ws, a.orders, repo);
  transfer_report down = pull_remote(b.ws, a.big, repo);
  CHECK(down.updated);
  CHECK(down.objects_transferred == 4);  // 3 blocks + slice, no checkpoint

  // data verifies without the checkpoint; the object is simply absent
  CHECK(verify_reproducibility(b.ws, a.big, true).ok);
  CHECK_FALSE(verify_integrity(b.ws, a.big, true).valid);

  // the next pull regenerates it from the chain
  pull_report healed = pull(b.ws, a.big, b.tick());
  CHECK(healed.ok);
  CHECK(verify_integrity(b.ws, a.big, true).valid);
  CHECK(b.ws.store().get(*et.new_checkpoint) ==
        a.ws.store().get(*et.new_checkpoint));
}

TEST_CASE("push refuses to propagate local corruption") {
  publisher a("corrupt_a");
  fs::path repo = fresh_dir("corrupt_repo");

  loaded_chain oc = a.ws.chain_of(a.orders);
  const auto& add = std::get<add_data_event>(oc.blocks.back().block.event);
  fs::path obj = a.dir / ".odf" / "objects" /
                 add.output_slice->slice_hash.substr(0, 2) /
                 add.output_slice->slice_hash.substr(2);
  std::string good = slurp(obj);
  std::string bad = good;
  bad[bad.size() / 2] ^= 0x01;
  stomp(obj, bad);
  CHECK_THROWS_WITH_AS(push(a.ws, a.orders, repo),
                       doctest::Contains("refusing to push"), error);
  CHECK_FALSE(fs::exists(repo / "refs" / a.orders));
  stomp(obj, good);
  CHECK(push(a.ws, a.orders, repo).updated);
}

TEST_CASE("an occupied name does not block adoption by id") {
  publisher a("name_a");
  fs::path repo = fresh_dir("name_repo");
  push(a.ws, a.orders, repo);

  site b("name_b");
  b.clock += 24 * k_hour;  // seeds are content-addressed; shift the clock
  b.write("orders.csv", orders_csv(1));
  object_hash own = b.add(k_orders_manifest);  // same name, different seed
  REQUIRE(own != a.orders);

  transfer_report down = pull_remote(b.ws, a.orders, repo);
  CHECK(down.updated);
  CHECK(b.ws.id_of("orders") == own);         // name stays put
  CHECK(b.ws.has_dataset(a.orders));          // dataset addressable by id
  CHECK(b.ws.chain_of(a.orders).head() == down.head);
}
