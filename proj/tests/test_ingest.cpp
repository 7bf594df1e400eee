#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "core/dataset_io.hpp"
#include "core/errors.hpp"
#include "ingest/csv.hpp"
#include "ingest/ingest.hpp"
#include "ingest/merge.hpp"
#include "ingest/source.hpp"

using namespace odf;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
  auto p = fs::temp_directory_path() /
           (std::string("odf_ingest_test_") + tag + "_" +
            std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

constexpr int64_t k_jan1 = 1577836800000;
constexpr int64_t k_hour = 3600000;

polling_source orders_source(int64_t lateness = 2 * k_hour) {
  polling_source p;
  p.format = source_format::csv;
  p.schema.columns = {{"order_id", column_type::int64_t_, false},
                      {"happened_at", column_type::timestamp_t, false}};
  p.event_time_column = "happened_at";
  p.merge.kind = merge_kind::ledger;
  p.merge.primary_key = {"order_id"};
  p.allowed_lateness_ms = lateness;
  return p;
}

polling_source prices_source() {
  polling_source p;
  p.format = source_format::csv;
  p.schema.columns = {{"sku", column_type::string_t, false},
                      {"price", column_type::int64_t_, false}};
  p.event_time_column.clear();
  p.merge.kind = merge_kind::snapshot;
  p.merge.primary_key = {"sku"};
  p.allowed_lateness_ms = 0;
  return p;
}

// store-backed chain builder plus an ingest shortcut
struct harness {
  object_store store;
  loaded_chain chain;

  explicit harness(const fs::path& dir) : store(dir) {}

  void add(metadata_event e, int64_t st) {
    metadata_block b = make_next_block(
        chain.blocks.empty() ? nullptr : &chain, std::move(e), st);
    object_hash h = store_block(store, b);
    chain.blocks.push_back({std::move(b), h});
  }

  ingest_outcome ingest(std::string_view bytes, int64_t st) {
    ingest_outcome out = ingest_round(store, chain, bytes, st);
    if (out.new_head) chain = load_chain(store, *out.new_head);
    return out;
  }
};

std::string iso(int64_t ms) { return canonical_encode(value::time_ms(ms)); }

std::string ts(int64_t ms) {
  std::string quoted = iso(ms);
  return quoted.substr(1, quoted.size() - 2);  // strip the json quotes
}

}  // namespace

TEST_CASE("csv parsing follows the quoting rules") {
  auto rows = parse_csv("a,b\n1,\"x,y\"\n2,\"he said \"\"hi\"\"\"\n");
  REQUIRE(rows.size() == 3);
  CHECK(rows[1] == std::vector<std::string>{"1", "x,y"});
  CHECK(rows[2] == std::vector<std::string>{"2", "he said \"hi\""});

  CHECK(parse_csv("a,b\r\n1,2\r\n") == parse_csv("a,b\n1,2\n"));
  CHECK(parse_csv("a,b\n1,2") == parse_csv("a,b\n1,2\n"));  // missing final \n

  auto multiline = parse_csv("a\n\"two\nlines\"\n");
  REQUIRE(multiline.size() == 2);
  CHECK(multiline[1][0] == "two\nlines");

  auto trailing = parse_csv("a,b\n1,\n");
  CHECK(trailing[1] == std::vector<std::string>{"1", ""});

  CHECK_THROWS_WITH_AS(parse_csv("a\n\"unterminated\n"),
                       doctest::Contains("ParseFailure"), error);
  CHECK_THROWS_AS(parse_csv("a\nmid\"quote\n"), error);
  CHECK_THROWS_AS(parse_csv("a\n\"x\"tail\n"), error);
  CHECK_THROWS_AS(parse_csv("a\rb\n"), error);  // bare CR
}

TEST_CASE("csv source rows become typed values") {
  polling_source src;
  src.format = source_format::csv;
  src.schema.columns = {{"id", column_type::int64_t_, false},
                        {"price", column_type::float64_t, false},
                        {"ok", column_type::bool_t, false},
                        {"at", column_type::timestamp_t, false},
                        {"name", column_type::string_t, true}};
  src.event_time_column = "at";
  src.merge.kind = merge_kind::ledger;
  src.merge.primary_key = {"id"};

  std::string text =
      "id,price,ok,at,name\n"
      "1,1.5,true,2020-01-01T00:00:00.000Z,widget\n"
      "2,-0.25,false,2020-01-01T06:30:00Z,\n";
  auto rows = parse_source(text, src);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].at("id") == value::integer(1));
  CHECK(rows[0].at("price") == value::floating(1.5));
  CHECK(rows[0].at("ok") == value::boolean(true));
  CHECK(rows[0].at("at") == value::time_ms(k_jan1));
  CHECK(rows[0].at("name") == value::string("widget"));
  CHECK(rows[1].at("name").is_null());  // empty cell, nullable column
  CHECK(rows[1].at("at") == value::time_ms(k_jan1 + 6 * k_hour + 30 * 60000));

  // BOM tolerated
  CHECK(parse_source("\xef\xbb\xbf" + text, src) == rows);

  auto bad = [&](const std::string& t) {
    CHECK_THROWS_AS(parse_source(t, src), error);
  };
  bad("id,price,ok,at\n");                       // header mismatch
  bad("id,price,ok,at,name,extra\n");            // header mismatch
  bad("price,id,ok,at,name\n");                  // wrong order
  bad("id,price,ok,at,name\n1,1.5,true\n");      // cell count
  bad("id,price,ok,at,name\nx,1.5,true," + ts(k_jan1) + ",y\n");
  bad("id,price,ok,at,name\n1,nope,true," + ts(k_jan1) + ",y\n");
  bad("id,price,ok,at,name\n1,inf,true," + ts(k_jan1) + ",y\n");
  bad("id,price,ok,at,name\n1,1.5,TRUE," + ts(k_jan1) + ",y\n");
  bad("id,price,ok,at,name\n1,1.5,true,yesterday,y\n");
  bad("id,price,ok,at,name\n,1.5,true," + ts(k_jan1) + ",y\n");  // null id
  // timestamp-shaped text cannot hide in a string column
  bad("id,price,ok,at,name\n1,1.5,true," + ts(k_jan1) + "," + ts(0) + "\n");
}

TEST_CASE("ndjson source rows keep the int/float distinction") {
  polling_source src;
  src.format = source_format::ndjson;
  src.schema.columns = {{"id", column_type::int64_t_, false},
                        {"price", column_type::float64_t, false},
                        {"at", column_type::timestamp_t, false},
                        {"name", column_type::string_t, true}};
  src.event_time_column = "at";
  src.merge.kind = merge_kind::ledger;
  src.merge.primary_key = {"id"};

  std::string good =
      "{\"id\":1,\"price\":1.5,\"at\":\"2020-01-01T00:00:00.000Z\",\"name\":null}\n"
      "{\"price\":2.0,\"id\":2,\"at\":\"2020-01-01T01:00:00Z\",\"name\":\"x\"}\n";
  auto rows = parse_source(good, src);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].at("price") == value::floating(1.5));
  CHECK(rows[0].at("name").is_null());
  CHECK(rows[1].at("at") == value::time_ms(k_jan1 + k_hour));

  auto bad = [&](const std::string& line) {
    CHECK_THROWS_AS(parse_source(line, src), error);
  };
  std::string at = "\"at\":\"2020-01-01T00:00:00Z\"";
  bad("{\"id\":1,\"price\":2," + at + ",\"name\":null}\n");    // int for float
  bad("{\"id\":1.0,\"price\":2.0," + at + ",\"name\":null}\n");  // float for int
  bad("{\"id\":1,\"price\":2.0," + at + "}\n");                // missing column
  bad("{\"id\":1,\"price\":2.0," + at + ",\"name\":null,\"x\":1}\n");
  bad("{\"id\":1,\"id\":2,\"price\":2.0," + at + ",\"name\":null}\n");
  bad("{\"id\":1,\"price\":2.0," + at + ",\"name\":{\"a\":1}}\n");  // nested
  bad("[1,2]\n");
  bad("42\n");
  bad("{\"id\":1,\"price\":2.0," + at + ",\"name\":null} trailing\n");
  bad("\n");
  bad("{\"id\":1,\"price\":2.0," + at +
      ",\"name\":\"2020-01-01T00:00:00.000Z\"}\n");  // ts-shaped string
}

TEST_CASE("ledger merge appends only unseen keys") {
  auto pk = std::vector<std::string>{"id"};
  auto row = [](int64_t id, int64_t v) {
    value::map_t m;
    m.emplace("id", value::integer(id));
    m.emplace("v", value::integer(v));
    return m;
  };
  std::map<std::string, value::map_t> history;
  history.emplace(primary_key_of(row(1, 10), pk), row(1, 10));

  auto fresh = merge_ledger({row(1, 10), row(2, 20), row(2, 20)}, history, pk);
  REQUIRE(fresh.size() == 1);
  CHECK(fresh[0] == row(2, 20));

  CHECK_THROWS_WITH_AS(merge_ledger({row(3, 1), row(3, 2)}, history, pk),
                       doctest::Contains("DuplicateKeyWithinBatchConflict"),
                       error);
  CHECK_THROWS_AS(merge_ledger({row(1, 99)}, history, pk), error);
}

TEST_CASE("snapshot merge diffs against projected state in key order") {
  auto pk = std::vector<std::string>{"sku"};
  auto row = [](const char* sku, int64_t price) {
    value::map_t m;
    m.emplace("sku", value::string(sku));
    m.emplace("price", value::integer(price));
    return m;
  };
  std::map<std::string, value::map_t> state;
  state.emplace(primary_key_of(row("a", 100), pk), row("a", 100));
  state.emplace(primary_key_of(row("b", 200), pk), row("b", 200));

  auto changes = merge_snapshot({row("c", 300), row("b", 250)}, state, pk);
  REQUIRE(changes.size() == 3);
  CHECK(changes[0] == snapshot_change{observed_op::retract, row("a", 100)});
  CHECK(changes[1] == snapshot_change{observed_op::correct, row("b", 250)});
  CHECK(changes[2] == snapshot_change{observed_op::append, row("c", 300)});

  CHECK(merge_snapshot({row("a", 100), row("b", 200)}, state, pk).empty());
  CHECK_THROWS_WITH_AS(merge_snapshot({row("x", 1), row("x", 1)}, state, pk),
                       doctest::Contains("DuplicateKeyInSnapshot"), error);
}

TEST_CASE("ledger rounds: dedup, fingerprints, watermarks") {
  harness h(fresh_dir("ledger"));
  h.add(seed_event{dataset_kind::root, "orders"}, k_jan1);
  h.add(set_polling_source_event{orders_source()}, k_jan1);

  std::string head = "order_id,happened_at\n";
  std::string r1 = head + "1," + ts(k_jan1) + "\n2," + ts(k_jan1 + 6 * k_hour) + "\n";
  auto o1 = h.ingest(r1, k_jan1 + 10);
  CHECK(!o1.unchanged);
  CHECK(o1.records_appended == 2);
  CHECK(o1.watermark == k_jan1 + 4 * k_hour);  // max event time minus lateness
  CHECK(h.chain.record_count() == 2);

  // re-poll: same rows plus two new ones, one of them older than the others
  std::string r2 = r1 + "3," + ts(k_jan1 + 5 * k_hour) + "\n4," +
                   ts(k_jan1 + 7 * k_hour) + "\n";
  auto o2 = h.ingest(r2, k_jan1 + 20);
  CHECK(o2.records_appended == 2);
  CHECK(o2.watermark == k_jan1 + 5 * k_hour);
  CHECK(h.chain.record_count() == 4);

  // identical bytes: no block at all
  auto o3 = h.ingest(r2, k_jan1 + 30);
  CHECK(o3.unchanged);
  CHECK(!o3.new_head);
  CHECK(h.chain.size() == 4);  // seed, source, two data blocks

  // late straggler: admitted, watermark stands still
  std::string r3 = r2 + "5," + ts(k_jan1 + k_hour) + "\n";
  auto o4 = h.ingest(r3, k_jan1 + 40);
  CHECK(o4.records_appended == 1);
  CHECK(o4.watermark == k_jan1 + 5 * k_hour);
  const auto& last = h.chain.blocks.back().block;
  CHECK(std::get<add_data_event>(last.event).output_watermark == std::nullopt);

  // rewriting history is not appending
  std::string mutated = head + "1," + ts(k_jan1 + 1) + "\n";
  CHECK_THROWS_AS(h.ingest(mutated, k_jan1 + 50), error);

  auto rep = validate_chain(h.store, h.chain.head());
  CHECK(rep.valid);
}

TEST_CASE("snapshot rounds: change capture and projection round trip") {
  harness h(fresh_dir("snap"));
  h.add(seed_event{dataset_kind::root, "prices"}, k_jan1);
  h.add(set_polling_source_event{prices_source()}, k_jan1);

  int64_t t1 = k_jan1 + 10, t2 = k_jan1 + 20, t3 = k_jan1 + 30;
  auto o1 = h.ingest("sku,price\na,100\nb,200\n", t1);
  CHECK(o1.records_appended == 2);
  CHECK(o1.watermark == t1);  // observation time, zero lateness

  auto o2 = h.ingest("sku,price\na,100\nb,250\nc,300\n", t2);
  CHECK(o2.records_appended == 2);  // correct b, append c
  CHECK(o2.watermark == t2);

  auto o3 = h.ingest("sku,price\na,100\nc,300\n", t3);
  CHECK(o3.records_appended == 1);  // retract b

  auto recs = read_root_records(h.store, h.chain, 0, h.chain.record_count());
  REQUIRE(recs.size() == 5);
  for (const auto& r : recs) CHECK(r.event_time == r.system_time);
  CHECK(recs[2].observed == observed_op::correct);
  CHECK(recs[3].observed == observed_op::append);
  CHECK(recs[4].observed == observed_op::retract);
  CHECK(recs[4].payload.at("price") == value::integer(250));  // last known

  auto state = project_state(recs, {"sku"});
  REQUIRE(state.size() == 2);
  CHECK(state.begin()->second.at("price") == value::integer(100));
  CHECK(std::prev(state.end())->second.at("price") == value::integer(300));

  // projecting only the first round reproduces the first poll
  auto early = project_state(read_root_records(h.store, h.chain, 0, 2), {"sku"});
  CHECK(early.size() == 2);
  CHECK(validate_chain(h.store, h.chain.head()).valid);
}

TEST_CASE("schema widening: old slices read back null-padded") {
  harness h(fresh_dir("era"));
  h.add(seed_event{dataset_kind::root, "orders"}, k_jan1);
  h.add(set_polling_source_event{orders_source(0)}, k_jan1);
  h.ingest("order_id,happened_at\n1," + ts(k_jan1) + "\n", k_jan1 + 10);

  polling_source wider = orders_source(0);
  wider.schema.columns.push_back({"note", column_type::string_t, true});
  h.add(set_polling_source_event{wider}, k_jan1 + 20);
  h.ingest("order_id,happened_at,note\n1," + ts(k_jan1) + ",\n2," +
               ts(k_jan1 + k_hour) + ",rush\n",
           k_jan1 + 30);

  auto recs = read_root_records(h.store, h.chain, 0, h.chain.record_count());
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].payload.at("note").is_null());  // padded
  CHECK(recs[1].payload.at("note") == value::string("rush"));
  CHECK(validate_chain(h.store, h.chain.head()).valid);

  // the fingerprint shortcut does not survive a source change
  std::string same = "order_id,happened_at,note\n1," + ts(k_jan1) + ",\n2," +
                     ts(k_jan1 + k_hour) + ",rush\n";
  h.add(set_polling_source_event{wider}, k_jan1 + 40);
  auto again = h.ingest(same, k_jan1 + 50);
  CHECK(!again.unchanged);
  CHECK(again.records_appended == 0);  // everything deduped
  CHECK(std::get<add_data_event>(h.chain.blocks.back().block.event)
            .output_slice == std::nullopt);
}

TEST_CASE("ingest needs a root dataset with a source") {
  harness h(fresh_dir("guards"));
  h.add(seed_event{dataset_kind::root, "orders"}, k_jan1);
  CHECK_THROWS_WITH_AS(h.ingest("order_id,happened_at\n", k_jan1 + 1),
                       doctest::Contains("InvalidEventSequence"), error);

  harness d(fresh_dir("guards2"));
  d.add(seed_event{dataset_kind::derivative, "view"}, k_jan1);
  CHECK_THROWS_WITH_AS(d.ingest("x\n", k_jan1 + 1),
                       doctest::Contains("IllegalOperationForKind"), error);
}

TEST_CASE("an empty snapshot poll retracts everything") {
  harness h(fresh_dir("empty"));
  h.add(seed_event{dataset_kind::root, "prices"}, k_jan1);
  h.add(set_polling_source_event{prices_source()}, k_jan1);
  h.ingest("sku,price\na,100\n", k_jan1 + 10);
  auto out = h.ingest("sku,price\n", k_jan1 + 20);
  CHECK(out.records_appended == 1);
  auto recs = read_root_records(h.store, h.chain, 0, 2);
  CHECK(recs[1].observed == observed_op::retract);
  CHECK(project_state(recs, {"sku"}).empty());
}
