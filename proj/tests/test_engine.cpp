#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/errors.hpp"
#include "dsl/dsl.hpp"
#include "engine/engine.hpp"

using namespace odf;
using namespace odf::engine;

namespace {

constexpr int64_t k_day = 86400LL * 1000;

schema_def orders_schema() {
  return schema_def{{
      {"order_id", column_type::int64_t_, false},
      {"order_time", column_type::timestamp_t, false},
      {"amount", column_type::float64_t, true},
      {"region", column_type::string_t, false},
  }};
}

schema_def shipments_schema() {
  return schema_def{{
      {"shipment_id", column_type::int64_t_, false},
      {"order_id", column_type::int64_t_, true},
      {"shipment_time", column_type::timestamp_t, false},
  }};
}

schema_def events_schema() {
  return schema_def{{
      {"region", column_type::string_t, false},
      {"qty", column_type::int64_t_, true},
  }};
}

dsl::typed_plan plan_of(const std::string& text) {
  std::map<std::string, schema_def> inputs = {
      {"orders", orders_schema()},
      {"shipments", shipments_schema()},
      {"events", events_schema()},
  };
  return dsl::analyze(dsl::parse(text), inputs);
}

record rec(uint64_t off, int64_t et, value::map_t payload) {
  return record{off, 0, et, std::nullopt, std::move(payload)};
}

value::map_t order_row(int64_t id, int64_t t, std::optional<double> amount,
                       const std::string& region) {
  value::map_t m;
  m.emplace("order_id", value::integer(id));
  m.emplace("order_time", value::time_ms(t));
  m.emplace("amount", amount ? value::floating(*amount) : value::null());
  m.emplace("region", value::string(region));
  return m;
}

value::map_t shipment_row(int64_t id, std::optional<int64_t> order_id,
                          int64_t t) {
  value::map_t m;
  m.emplace("shipment_id", value::integer(id));
  m.emplace("order_id", order_id ? value::integer(*order_id) : value::null());
  m.emplace("shipment_time", value::time_ms(t));
  return m;
}

value::map_t event_row(const std::string& region,
                       std::optional<int64_t> qty) {
  value::map_t m;
  m.emplace("region", value::string(region));
  m.emplace("qty", qty ? value::integer(*qty) : value::null());
  return m;
}

transform_response run(const dsl::typed_plan& plan,
                       std::vector<input_batch> inputs,
                       const value* prior = nullptr,
                       trace_sink* sink = nullptr) {
  transform_request req;
  req.plan = &plan;
  req.inputs = std::move(inputs);
  req.prior_state = prior;
  return execute(req, sink);
}

struct collect_sink : trace_sink {
  std::vector<std::vector<std::pair<size_t, int64_t>>> sources;
  void row(const output_row&,
           const std::vector<std::pair<size_t, int64_t>>& s) override {
    sources.push_back(s);
  }
};

const value& field(const output_row& r, const char* name) {
  auto it = r.payload.find(name);
  REQUIRE(it != r.payload.end());
  return it->second;
}

}  // namespace

TEST_CASE("stateless projection filters, forwards event times, drops late") {
  auto plan = plan_of(
      "SELECT order_id, amount * 2.0 AS dbl FROM orders "
      "WHERE amount IS NOT NULL");

  input_batch b1;
  b1.records.push_back(rec(0, 1000, order_row(1, 1000, 5.0, "eu")));
  b1.records.push_back(rec(1, 2000, order_row(2, 2000, std::nullopt, "us")));
  b1.watermark = 1500;
  auto r1 = run(plan, {std::move(b1)});
  REQUIRE(r1.rows.size() == 1);
  CHECK(r1.rows[0].event_time == 1000);
  CHECK(field(r1.rows[0], "order_id").as_int() == 1);
  CHECK(field(r1.rows[0], "dbl").as_float() == 10.0);
  CHECK(r1.late_records_ignored == 0);
  REQUIRE(r1.output_watermark.has_value());
  CHECK(*r1.output_watermark == 1500);

  // next request: a record below the in-force watermark is dropped
  input_batch b2;
  b2.records.push_back(rec(2, 1200, order_row(3, 1200, 1.0, "eu")));
  b2.records.push_back(rec(3, 1500, order_row(4, 1500, 2.0, "eu")));
  auto r2 = run(plan, {std::move(b2)}, &r1.new_state);
  REQUIRE(r2.rows.size() == 1);
  CHECK(field(r2.rows[0], "order_id").as_int() == 4);
  CHECK(r2.late_records_ignored == 1);

  engine_state st = decode_state(r2.new_state, plan);
  CHECK(st.late_total == 1);
}

TEST_CASE("fresh stateless plan has no output watermark until inputs do") {
  auto plan = plan_of("SELECT order_id FROM orders");
  input_batch b;
  b.records.push_back(rec(0, 1000, order_row(1, 1000, 1.0, "eu")));
  auto r = run(plan, {std::move(b)});
  CHECK_FALSE(r.output_watermark.has_value());
  CHECK(r.rows.size() == 1);
}

TEST_CASE("tumbling windows close when the watermark reaches their end") {
  auto plan = plan_of(
      "SELECT region, COUNT(*) AS n, SUM(qty) AS total FROM events "
      "GROUP BY TUMBLE(event_time, INTERVAL '1' SECOND), region");

  input_batch b1;
  b1.records.push_back(rec(0, 100, event_row("eu", 5)));
  b1.records.push_back(rec(1, 600, event_row("eu", 7)));
  b1.records.push_back(rec(2, 800, event_row("us", 1)));
  b1.records.push_back(rec(3, 1500, event_row("eu", 2)));
  b1.watermark = 1000;
  auto r1 = run(plan, {std::move(b1)});

  // [0,1000) closes for both groups, emitted in group key order
  REQUIRE(r1.rows.size() == 2);
  CHECK(r1.rows[0].event_time == 0);
  CHECK(field(r1.rows[0], "region").as_string() == "eu");
  CHECK(field(r1.rows[0], "n").as_int() == 2);
  CHECK(field(r1.rows[0], "total").as_int() == 12);
  CHECK(field(r1.rows[1], "region").as_string() == "us");
  CHECK(field(r1.rows[1], "n").as_int() == 1);
  REQUIRE(r1.output_watermark.has_value());
  CHECK(*r1.output_watermark == 1000);

  engine_state st = decode_state(r1.new_state, plan);
  REQUIRE(st.windows.size() == 1);  // [1000,2000) eu still open
  CHECK(st.windows[0].start == 1000);

  // watermark-only request closes the straggler window
  input_batch b2;
  b2.watermark = 2000;
  auto r2 = run(plan, {std::move(b2)}, &r1.new_state);
  REQUIRE(r2.rows.size() == 1);
  CHECK(r2.rows[0].event_time == 1000);
  CHECK(field(r2.rows[0], "n").as_int() == 1);
  CHECK(field(r2.rows[0], "total").as_int() == 2);
  CHECK(decode_state(r2.new_state, plan).windows.empty());
}

TEST_CASE("late records never reopen an emitted window") {
  auto plan = plan_of(
      "SELECT region, COUNT(*) AS n FROM events "
      "GROUP BY TUMBLE(event_time, INTERVAL '1' SECOND), region");
  input_batch b1;
  b1.records.push_back(rec(0, 100, event_row("eu", 1)));
  b1.watermark = 1000;
  auto r1 = run(plan, {std::move(b1)});
  REQUIRE(r1.rows.size() == 1);

  input_batch b2;
  b2.records.push_back(rec(1, 900, event_row("eu", 1)));  // below wm 1000
  b2.records.push_back(rec(2, 1100, event_row("eu", 1)));
  auto r2 = run(plan, {std::move(b2)}, &r1.new_state);
  CHECK(r2.rows.empty());
  CHECK(r2.late_records_ignored == 1);
  engine_state st = decode_state(r2.new_state, plan);
  CHECK(st.late_total == 1);
  REQUIRE(st.windows.size() == 1);
  CHECK(st.windows[0].rows.size() == 1);  // only the on-time record buffered
}

TEST_CASE("null aggregate inputs are skipped, all-null sums are null") {
  auto plan = plan_of(
      "SELECT region, COUNT(qty) AS nn, SUM(qty) AS total, AVG(qty) AS mean "
      "FROM events GROUP BY TUMBLE(event_time, INTERVAL '1' SECOND), region");
  input_batch b;
  b.records.push_back(rec(0, 100, event_row("eu", std::nullopt)));
  b.records.push_back(rec(1, 200, event_row("eu", std::nullopt)));
  b.records.push_back(rec(2, 300, event_row("us", 4)));
  b.records.push_back(rec(3, 400, event_row("us", 6)));
  b.watermark = 1000;
  auto r = run(plan, {std::move(b)});
  REQUIRE(r.rows.size() == 2);
  CHECK(field(r.rows[0], "nn").as_int() == 0);
  CHECK(field(r.rows[0], "total").kind() == value_kind::null);
  CHECK(field(r.rows[0], "mean").kind() == value_kind::null);
  CHECK(field(r.rows[1], "total").as_int() == 10);
  CHECK(field(r.rows[1], "mean").as_float() == 5.0);
}

TEST_CASE("watermark advance follows the class rule") {
  auto stateless = plan_of("SELECT order_id FROM orders");
  CHECK(*advance_watermark(stateless, {7}) == 7);

  auto windowed = plan_of(
      "SELECT region, COUNT(*) AS n FROM events "
      "GROUP BY TUMBLE(event_time, INTERVAL '10' SECOND), region");
  CHECK(*advance_watermark(windowed, {27000}) == 20000);
  CHECK(*advance_watermark(windowed, {30000}) == 30000);
  CHECK_FALSE(advance_watermark(windowed, {std::nullopt}).has_value());

  auto joined = plan_of(
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' WEEK");
  CHECK(*advance_watermark(joined, {30 * k_day, 20 * k_day}) == 13 * k_day);
  CHECK(*advance_watermark(joined, {10 * k_day, 20 * k_day}) == 10 * k_day);
  CHECK_FALSE(advance_watermark(joined, {30 * k_day, std::nullopt}));
}

TEST_CASE("interval join emits matches once the right watermark passes") {
  auto plan = plan_of(
      "SELECT o.order_id, s.shipment_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' WEEK");

  input_batch lefts;
  lefts.records.push_back(rec(0, 1 * k_day, order_row(1, 1 * k_day, 1.0, "eu")));
  lefts.records.push_back(rec(1, 2 * k_day, order_row(2, 2 * k_day, 1.0, "eu")));
  lefts.watermark = 4 * k_day;
  input_batch rights;
  rights.records.push_back(rec(0, 3 * k_day, shipment_row(10, 1, 3 * k_day)));
  rights.watermark = 3 * k_day;
  auto r1 = run(plan, {std::move(lefts), std::move(rights)});
  CHECK(r1.rows.empty());  // nothing resolved: wmR has not passed t+U
  REQUIRE(r1.output_watermark.has_value());
  CHECK(*r1.output_watermark == std::min(4 * k_day, 3 * k_day - 7 * k_day));

  // wmR day9 > day1+7d resolves the first order only
  input_batch l2, r2b;
  r2b.watermark = 9 * k_day;
  auto r2 = run(plan, {std::move(l2), std::move(r2b)}, &r1.new_state);
  REQUIRE(r2.rows.size() == 1);
  CHECK(r2.rows[0].event_time == 1 * k_day);
  CHECK(field(r2.rows[0], "order_id").as_int() == 1);
  CHECK(field(r2.rows[0], "shipment_id").as_int() == 10);

  // inner join: the unmatched order vanishes once resolved
  input_batch l3, r3b;
  r3b.watermark = 10 * k_day;
  auto r3 = run(plan, {std::move(l3), std::move(r3b)}, &r2.new_state);
  CHECK(r3.rows.empty());
  engine_state st = decode_state(r3.new_state, plan);
  CHECK(st.lefts.empty());
}

TEST_CASE("left join null-extends unmatched orders: the anti-join pattern") {
  auto plan = plan_of(
      "SELECT o.order_time, o.order_id FROM orders AS o "
      "LEFT JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' WEEK "
      "WHERE s.shipment_id IS NULL");

  input_batch lefts;
  lefts.records.push_back(rec(0, 1 * k_day, order_row(1, 1 * k_day, 1.0, "eu")));
  lefts.records.push_back(rec(1, 2 * k_day, order_row(2, 2 * k_day, 1.0, "eu")));
  lefts.watermark = 3 * k_day;
  input_batch rights;
  rights.records.push_back(rec(0, 3 * k_day, shipment_row(10, 1, 3 * k_day)));
  rights.watermark = 10 * k_day;  // both orders resolve immediately
  auto r = run(plan, {std::move(lefts), std::move(rights)});

  // order 1 shipped (filtered out), order 2 never shipped
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].event_time == 2 * k_day);
  CHECK(field(r.rows[0], "order_id").as_int() == 2);
  REQUIRE(r.rows[0].payload.count("order_time") == 1);
  CHECK(field(r.rows[0], "order_time").as_time().ms == 2 * k_day);
}

TEST_CASE("BETWEEN is inclusive on both ends") {
  auto plan = plan_of(
      "SELECT o.order_id, s.shipment_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' SECOND");
  input_batch lefts;
  lefts.records.push_back(rec(0, 5000, order_row(1, 5000, 1.0, "eu")));
  lefts.watermark = 5000;
  input_batch rights;
  rights.records.push_back(rec(0, 5000, shipment_row(20, 1, 5000)));   // == t
  rights.records.push_back(rec(1, 6000, shipment_row(21, 1, 6000)));   // == t+U
  rights.records.push_back(rec(2, 6001, shipment_row(22, 1, 6001)));   // past
  rights.watermark = 7000;
  auto r = run(plan, {std::move(lefts), std::move(rights)});
  REQUIRE(r.rows.size() == 2);
  CHECK(field(r.rows[0], "shipment_id").as_int() == 20);
  CHECK(field(r.rows[1], "shipment_id").as_int() == 21);
}

TEST_CASE("null join keys never match") {
  auto plan = plan_of(
      "SELECT o.order_id, s.shipment_id FROM orders AS o "
      "LEFT JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' WEEK");
  input_batch lefts;
  lefts.records.push_back(rec(0, 1 * k_day, order_row(7, 1 * k_day, 1.0, "eu")));
  lefts.watermark = 1 * k_day;
  input_batch rights;
  rights.records.push_back(
      rec(0, 2 * k_day, shipment_row(30, std::nullopt, 2 * k_day)));
  rights.watermark = 9 * k_day;
  auto r = run(plan, {std::move(lefts), std::move(rights)});
  REQUIRE(r.rows.size() == 1);  // null-extended, not matched
  CHECK(field(r.rows[0], "shipment_id").kind() == value_kind::null);
}

TEST_CASE("late records on either join side are dropped and counted") {
  auto plan = plan_of(
      "SELECT o.order_id, s.shipment_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' WEEK");
  input_batch l1, r1b;
  l1.watermark = 5 * k_day;
  r1b.watermark = 5 * k_day;
  auto r1 = run(plan, {std::move(l1), std::move(r1b)});

  input_batch l2, r2b;
  l2.records.push_back(rec(0, 4 * k_day, order_row(1, 4 * k_day, 1.0, "eu")));
  r2b.records.push_back(rec(0, 3 * k_day, shipment_row(9, 1, 3 * k_day)));
  auto r2 = run(plan, {std::move(l2), std::move(r2b)}, &r1.new_state);
  CHECK(r2.late_records_ignored == 2);
  engine_state st = decode_state(r2.new_state, plan);
  CHECK(st.lefts.empty());
  CHECK(st.rights.empty());
  CHECK(st.late_total == 2);
}

TEST_CASE("join emission order is by left event time, then offsets") {
  auto plan = plan_of(
      "SELECT o.order_id FROM orders AS o LEFT JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' SECOND");

  // lefts arrive out of event-time order
  auto make_lefts = [&]() {
    input_batch b;
    b.records.push_back(rec(0, 2000, order_row(1, 2000, 1.0, "eu")));
    b.records.push_back(rec(1, 1000, order_row(2, 1000, 1.0, "eu")));
    return b;
  };

  // sliced: resolve the earlier-in-time left first, then the other
  input_batch l1 = make_lefts();
  input_batch r1b;
  r1b.watermark = 2500;  // > 1000+1000, not > 2000+1000
  auto step1 = run(plan, {std::move(l1), std::move(r1b)});
  REQUIRE(step1.rows.size() == 1);
  CHECK(field(step1.rows[0], "order_id").as_int() == 2);
  input_batch l2, r2b;
  r2b.watermark = 9000;
  auto step2 = run(plan, {std::move(l2), std::move(r2b)}, &step1.new_state);
  REQUIRE(step2.rows.size() == 1);
  CHECK(field(step2.rows[0], "order_id").as_int() == 1);

  // single shot delivers the same concatenation
  input_batch l3 = make_lefts();
  input_batch r3b;
  r3b.watermark = 9000;
  auto whole = run(plan, {std::move(l3), std::move(r3b)});
  REQUIRE(whole.rows.size() == 2);
  CHECK(field(whole.rows[0], "order_id").as_int() == 2);
  CHECK(field(whole.rows[1], "order_id").as_int() == 1);
}

TEST_CASE("checkpoints round trip and reject tampering") {
  auto plan = plan_of(
      "SELECT region, COUNT(*) AS n FROM events "
      "GROUP BY TUMBLE(event_time, INTERVAL '1' SECOND), region");
  input_batch b;
  b.records.push_back(rec(0, 100, event_row("eu", 1)));
  b.records.push_back(rec(1, 1500, event_row("us", 2)));
  b.watermark = 900;
  auto r = run(plan, {std::move(b)});

  std::string bytes = canonical_encode(r.new_state);
  value reread = canonical_decode(bytes);
  engine_state st = decode_state(reread, plan);
  CHECK(canonical_encode(encode_state(st)) == bytes);
  CHECK(st.windows.size() == 2);

  // wrong class
  auto joined = plan_of(
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' WEEK");
  CHECK_THROWS_AS((void)decode_state(reread, joined), error);

  // stray field
  value::map_t m = reread.as_map();
  m.emplace("extra", value::integer(1));
  CHECK_THROWS_AS((void)decode_state(value::map(m), plan), error);

  // watermark arity mismatch
  value::map_t m2 = reread.as_map();
  m2["input_watermarks"] = value::array({value::null(), value::null()});
  CHECK_THROWS_AS((void)decode_state(value::map(m2), plan), error);
}

TEST_CASE("watermark regression is rejected") {
  auto plan = plan_of("SELECT order_id FROM orders");
  input_batch b1;
  b1.watermark = 5000;
  auto r1 = run(plan, {std::move(b1)});
  input_batch b2;
  b2.watermark = 4000;
  CHECK_THROWS_AS((void)run(plan, {std::move(b2)}, &r1.new_state), error);

  // equal watermark is fine
  input_batch b3;
  b3.watermark = 5000;
  CHECK_NOTHROW((void)run(plan, {std::move(b3)}, &r1.new_state));
}

TEST_CASE("arithmetic faults surface as typed errors") {
  // division by zero
  auto div_plan = plan_of("SELECT order_id / 0 AS x FROM orders");
  input_batch b;
  b.records.push_back(rec(0, 1000, order_row(1, 1000, 1.0, "eu")));
  try {
    (void)run(div_plan, {std::move(b)});
    FAIL("expected eval error");
  } catch (const error& e) {
    CHECK(e.code() == errc::eval_error);
  }

  // SUM overflow
  auto sum_plan = plan_of(
      "SELECT region, SUM(qty) AS total FROM events "
      "GROUP BY TUMBLE(event_time, INTERVAL '1' SECOND), region");
  input_batch b2;
  b2.records.push_back(rec(0, 100, event_row("eu", INT64_MAX)));
  b2.records.push_back(rec(1, 200, event_row("eu", 1)));
  b2.watermark = 1000;
  try {
    (void)run(sum_plan, {std::move(b2)});
    FAIL("expected overflow");
  } catch (const error& e) {
    CHECK(e.code() == errc::arithmetic_overflow);
  }

  // timestamp shift past the representable range
  auto shift_plan =
      plan_of("SELECT order_time + INTERVAL '1' WEEK AS due FROM orders");
  input_batch b3;
  b3.records.push_back(
      rec(0, k_timestamp_max_ms,
          order_row(1, k_timestamp_max_ms, 1.0, "eu")));
  try {
    (void)run(shift_plan, {std::move(b3)});
    FAIL("expected eval error");
  } catch (const error& e) {
    CHECK(e.code() == errc::eval_error);
  }

  // request arity mismatch
  auto plan = plan_of("SELECT order_id FROM orders");
  try {
    (void)run(plan, {});
    FAIL("expected schema mismatch");
  } catch (const error& e) {
    CHECK(e.code() == errc::schema_mismatch);
  }
}

TEST_CASE("trace sink names the exact contributing records") {
  // stateless: one source per row
  auto sl = plan_of("SELECT order_id FROM orders WHERE amount IS NOT NULL");
  collect_sink sink1;
  input_batch b1;
  b1.records.push_back(rec(5, 1000, order_row(1, 1000, 1.0, "eu")));
  b1.records.push_back(rec(6, 1100, order_row(2, 1100, std::nullopt, "eu")));
  b1.records.push_back(rec(7, 1200, order_row(3, 1200, 2.0, "eu")));
  (void)run(sl, {std::move(b1)}, nullptr, &sink1);
  REQUIRE(sink1.sources.size() == 2);
  CHECK(sink1.sources[0] ==
        std::vector<std::pair<size_t, int64_t>>{{0, 5}});
  CHECK(sink1.sources[1] ==
        std::vector<std::pair<size_t, int64_t>>{{0, 7}});

  // windowed: all members of the closed window
  auto wd = plan_of(
      "SELECT region, COUNT(*) AS n FROM events "
      "GROUP BY TUMBLE(event_time, INTERVAL '1' SECOND), region");
  collect_sink sink2;
  input_batch b2;
  b2.records.push_back(rec(0, 100, event_row("eu", 1)));
  b2.records.push_back(rec(1, 700, event_row("eu", 2)));
  b2.records.push_back(rec(2, 800, event_row("us", 3)));
  b2.watermark = 1000;
  (void)run(wd, {std::move(b2)}, nullptr, &sink2);
  REQUIRE(sink2.sources.size() == 2);
  CHECK(sink2.sources[0] ==
        std::vector<std::pair<size_t, int64_t>>{{0, 0}, {0, 1}});
  CHECK(sink2.sources[1] ==
        std::vector<std::pair<size_t, int64_t>>{{0, 2}});

  // joined: the pair, or the left alone for null-extended rows
  auto jn = plan_of(
      "SELECT o.order_id FROM orders AS o LEFT JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' WEEK");
  collect_sink sink3;
  input_batch lb, rb;
  lb.records.push_back(rec(0, 1 * k_day, order_row(1, 1 * k_day, 1.0, "eu")));
  lb.records.push_back(rec(1, 2 * k_day, order_row(2, 2 * k_day, 1.0, "eu")));
  lb.watermark = 2 * k_day;
  rb.records.push_back(rec(3, 2 * k_day, shipment_row(9, 1, 2 * k_day)));
  rb.watermark = 10 * k_day;
  (void)run(jn, {std::move(lb), std::move(rb)}, nullptr, &sink3);
  REQUIRE(sink3.sources.size() == 2);
  CHECK(sink3.sources[0] ==
        std::vector<std::pair<size_t, int64_t>>{{0, 0}, {1, 3}});
  CHECK(sink3.sources[1] ==
        std::vector<std::pair<size_t, int64_t>>{{0, 1}});
}

// ---- slicing invariance ----

namespace {

struct item_stream {
  std::vector<record> records;  // event times nondecreasing per input
  // cumulative watermark value in force after consuming records[0..i)
  std::vector<std::optional<int64_t>> wm_after;
};

// well-behaved single-input stream: watermarks trail event times
item_stream make_stream(uint64_t seed, int n) {
  item_stream s;
  uint64_t state = seed;
  auto next = [&state]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
  };
  int64_t et = 0;
  std::optional<int64_t> wm;
  for (int i = 0; i < n; i++) {
    et += next() % 700;
    const char* regions[] = {"eu", "us", "ap"};
    s.records.push_back(rec(static_cast<uint64_t>(i), et,
                            event_row(regions[next() % 3],
                                      next() % 5 == 0
                                          ? std::optional<int64_t>()
                                          : std::optional<int64_t>(
                                                int64_t(next() % 100)))));
    if (next() % 6 == 0) wm = et;  // never ahead of any future event
    s.wm_after.push_back(wm);
  }
  return s;
}

std::vector<size_t> random_cuts(uint64_t seed, size_t n, size_t pieces) {
  std::vector<size_t> cuts;
  uint64_t state = seed * 2654435761u + 1;
  auto next = [&state]() {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return state >> 33;
  };
  for (size_t i = 0; i + 1 < pieces; i++) cuts.push_back(next() % (n + 1));
  cuts.push_back(n);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  if (cuts.empty() || cuts.back() != n) cuts.push_back(n);
  return cuts;
}

struct run_result {
  std::vector<output_row> rows;
  std::string final_state;
  int64_t late = 0;
};

run_result run_partitioned(const dsl::typed_plan& plan, const item_stream& s,
                           const std::vector<size_t>& cuts) {
  run_result out;
  value state;
  bool have_state = false;
  size_t a = 0;
  for (size_t b : cuts) {
    input_batch batch;
    for (size_t i = a; i < b; i++) batch.records.push_back(s.records[i]);
    batch.watermark = b > 0 ? s.wm_after[b - 1] : std::nullopt;
    transform_request req;
    req.plan = &plan;
    req.inputs.push_back(std::move(batch));
    req.prior_state = have_state ? &state : nullptr;
    auto resp = execute(req);
    for (auto& r : resp.rows) out.rows.push_back(std::move(r));
    out.late += resp.late_records_ignored;
    state = std::move(resp.new_state);
    have_state = true;
    a = b;
  }
  out.final_state = canonical_encode(state);
  return out;
}

bool rows_equal(const std::vector<output_row>& a,
                const std::vector<output_row>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); i++) {
    if (a[i].event_time != b[i].event_time) return false;
    if (!(value::map(a[i].payload) == value::map(b[i].payload))) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("windowed outputs are invariant under request slicing") {
  auto plan = plan_of(
      "SELECT region, COUNT(*) AS n, SUM(qty) AS total FROM events "
      "GROUP BY TUMBLE(event_time, INTERVAL '2' SECOND), region");
  item_stream s = make_stream(0xabcdef, 200);
  run_result whole = run_partitioned(plan, s, {s.records.size()});
  CHECK(whole.late == 0);
  for (uint64_t trial = 0; trial < 25; trial++) {
    auto cuts = random_cuts(trial + 1, s.records.size(), 2 + trial % 9);
    run_result sliced = run_partitioned(plan, s, cuts);
    CAPTURE(trial);
    CHECK(rows_equal(whole.rows, sliced.rows));
    CHECK(sliced.final_state == whole.final_state);
    CHECK(sliced.late == 0);
  }
}

TEST_CASE("stateless outputs are invariant under request slicing") {
  auto plan = plan_of(
      "SELECT region, qty * 2 AS dbl FROM events WHERE qty IS NOT NULL");
  item_stream s = make_stream(0x5eed, 150);
  run_result whole = run_partitioned(plan, s, {s.records.size()});
  for (uint64_t trial = 0; trial < 10; trial++) {
    auto cuts = random_cuts(trial + 77, s.records.size(), 3 + trial % 7);
    run_result sliced = run_partitioned(plan, s, cuts);
    CHECK(rows_equal(whole.rows, sliced.rows));
    CHECK(sliced.final_state == whole.final_state);
  }
}

namespace {

// two-input stream sliced in aligned steps
struct join_stream {
  std::vector<std::vector<record>> left_steps;
  std::vector<std::vector<record>> right_steps;
  std::vector<std::optional<int64_t>> left_wm_after;
  std::vector<std::optional<int64_t>> right_wm_after;
};

join_stream make_join_stream(uint64_t seed, int steps) {
  join_stream s;
  uint64_t state = seed;
  auto next = [&state]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
  };
  int64_t lt = 0, rt = 0;
  uint64_t loff = 0, roff = 0;
  std::optional<int64_t> lwm, rwm;
  for (int i = 0; i < steps; i++) {
    std::vector<record> ls, rs;
    if (next() % 3 != 0) {
      lt += next() % 5000;
      int64_t id = next() % 40;
      ls.push_back(rec(loff++, lt, order_row(id, lt, 1.0, "eu")));
    }
    if (next() % 3 != 0) {
      rt += next() % 5000;
      int64_t id = next() % 40;
      rs.push_back(rec(roff, rt, shipment_row(int64_t(roff) + 1, id, rt)));
      roff++;
    }
    if (next() % 4 == 0) lwm = lt;
    if (next() % 4 == 0) rwm = rt;
    s.left_steps.push_back(std::move(ls));
    s.right_steps.push_back(std::move(rs));
    s.left_wm_after.push_back(lwm);
    s.right_wm_after.push_back(rwm);
  }
  return s;
}

run_result run_join_partitioned(const dsl::typed_plan& plan,
                                const join_stream& s,
                                const std::vector<size_t>& cuts) {
  run_result out;
  value state;
  bool have_state = false;
  size_t a = 0;
  for (size_t b : cuts) {
    input_batch lb, rb;
    for (size_t i = a; i < b; i++) {
      for (const record& r : s.left_steps[i]) lb.records.push_back(r);
      for (const record& r : s.right_steps[i]) rb.records.push_back(r);
    }
    lb.watermark = b > 0 ? s.left_wm_after[b - 1] : std::nullopt;
    rb.watermark = b > 0 ? s.right_wm_after[b - 1] : std::nullopt;
    transform_request req;
    req.plan = &plan;
    req.inputs.push_back(std::move(lb));
    req.inputs.push_back(std::move(rb));
    req.prior_state = have_state ? &state : nullptr;
    auto resp = execute(req);
    for (auto& r : resp.rows) out.rows.push_back(std::move(r));
    out.late += resp.late_records_ignored;
    state = std::move(resp.new_state);
    have_state = true;
    a = b;
  }
  out.final_state = canonical_encode(state);
  return out;
}

}  // namespace

TEST_CASE("joined outputs are invariant under request slicing") {
  auto plan = plan_of(
      "SELECT o.order_id, s.shipment_id FROM orders AS o "
      "LEFT JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '10' SECOND");
  join_stream s = make_join_stream(0xfeed, 120);
  run_result whole =
      run_join_partitioned(plan, s, {s.left_steps.size()});
  CHECK(whole.late == 0);
  for (uint64_t trial = 0; trial < 25; trial++) {
    auto cuts = random_cuts(trial + 13, s.left_steps.size(), 2 + trial % 9);
    run_result sliced = run_join_partitioned(plan, s, cuts);
    CAPTURE(trial);
    CHECK(rows_equal(whole.rows, sliced.rows));
    CHECK(sliced.final_state == whole.final_state);
  }
}

TEST_CASE("a final infinite watermark flushes every buffer") {
  auto plan = plan_of(
      "SELECT o.order_id, s.shipment_id FROM orders AS o "
      "LEFT JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' WEEK");
  input_batch lb, rb;
  lb.records.push_back(rec(0, 1 * k_day, order_row(1, 1 * k_day, 1.0, "eu")));
  lb.records.push_back(rec(1, 50 * k_day, order_row(2, 50 * k_day, 1.0, "eu")));
  rb.records.push_back(rec(0, 2 * k_day, shipment_row(5, 1, 2 * k_day)));
  lb.watermark = INT64_MAX;
  rb.watermark = INT64_MAX;
  auto r = run(plan, {std::move(lb), std::move(rb)});
  REQUIRE(r.rows.size() == 2);
  CHECK(field(r.rows[0], "shipment_id").as_int() == 5);
  CHECK(field(r.rows[1], "shipment_id").kind() == value_kind::null);
  engine_state st = decode_state(r.new_state, plan);
  CHECK(st.lefts.empty());

  auto wplan = plan_of(
      "SELECT region, COUNT(*) AS n FROM events "
      "GROUP BY TUMBLE(event_time, INTERVAL '1' SECOND), region");
  input_batch b;
  b.records.push_back(rec(0, 100, event_row("eu", 1)));
  b.watermark = INT64_MAX;
  auto wr = run(wplan, {std::move(b)});
  REQUIRE(wr.rows.size() == 1);
  CHECK(decode_state(wr.new_state, wplan).windows.empty());
}
