#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <string>

#include "core/errors.hpp"
#include "dsl/dsl.hpp"

using namespace odf;
using namespace odf::dsl;

namespace {

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
      {"order_id", column_type::int64_t_, false},
      {"shipment_time", column_type::timestamp_t, false},
  }};
}

std::map<std::string, schema_def> one_input() {
  return {{"orders", orders_schema()}};
}

std::map<std::string, schema_def> two_inputs() {
  return {{"orders", orders_schema()}, {"shipments", shipments_schema()}};
}

const char* k_antijoin =
    "SELECT o.order_time, o.order_id "
    "FROM orders AS o "
    "LEFT JOIN shipments AS s "
    "ON o.order_id = s.order_id "
    "AND s.shipment_time BETWEEN o.order_time AND o.order_time "
    "+ INTERVAL '1' WEEK "
    "WHERE s.shipment_id IS NULL";

parse_error capture_parse_error(const std::string& text) {
  try {
    (void)parse(text);
  } catch (const parse_error& e) {
    return e;
  }
  FAIL("expected a parse error for: " << text);
  throw std::logic_error("unreachable");
}

error capture_analyze_error(const std::string& text,
                            const std::map<std::string, schema_def>& inputs,
                            errc want) {
  try {
    (void)analyze(parse(text), inputs);
  } catch (const error& e) {
    CHECK(e.code() == want);
    return e;
  }
  FAIL("expected " << errc_name(want) << " for: " << text);
  throw std::logic_error("unreachable");
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("bare projection analyzes to a stateless single-input plan") {
  typed_plan p = analyze(parse("SELECT order_id FROM orders"), one_input());
  CHECK(p.cls == plan_class::stateless);
  CHECK(classify(p) == plan_class::stateless);
  CHECK(temporal_reach_ms(p) == 0);
  REQUIRE(p.table_names.size() == 1);
  CHECK(p.table_names[0] == "orders");
  CHECK(p.aliases[0] == "orders");
  REQUIRE(p.select.size() == 1);
  CHECK(p.select[0].name == "order_id");
  CHECK(p.select[0].e->op == texpr_op::column);
  CHECK(p.select[0].e->col == bound_column{0, 0});
  CHECK(p.output_schema.columns[0].type == column_type::int64_t_);
  CHECK_FALSE(p.output_schema.columns[0].nullable);
  CHECK(p.where == nullptr);
}

TEST_CASE("keywords are case-insensitive, identifiers are not") {
  typed_plan p =
      analyze(parse("select order_id from orders where amount > 2.5"),
              one_input());
  CHECK(p.cls == plan_class::stateless);
  REQUIRE(p.where != nullptr);
  CHECK(p.where->op == texpr_op::gt);
  CHECK(p.where->nullable);  // amount is nullable

  capture_analyze_error("SELECT ORDER_ID FROM orders", one_input(),
                        errc::unknown_column);
}

TEST_CASE("the shipment anti-join binds keys, bounds and nullability") {
  typed_plan p = analyze(parse(k_antijoin), two_inputs());
  CHECK(p.cls == plan_class::joined);
  CHECK(p.join_left_outer);
  CHECK(temporal_reach_ms(p) == 7 * 86400LL * 1000);
  CHECK(p.join_upper_ms == 604800000);
  REQUIRE(p.table_names.size() == 2);
  CHECK(p.table_names[0] == "orders");
  CHECK(p.table_names[1] == "shipments");
  CHECK(p.aliases[0] == "o");
  CHECK(p.aliases[1] == "s");
  REQUIRE(p.join_keys.size() == 1);
  CHECK(p.join_keys[0].first == bound_column{0, 0});
  CHECK(p.join_keys[0].second == bound_column{1, 1});
  CHECK(p.left_time == bound_column{0, 1});
  CHECK(p.right_time == bound_column{1, 2});

  REQUIRE(p.where != nullptr);
  CHECK(p.where->op == texpr_op::is_null);
  CHECK(p.where->a->op == texpr_op::column);
  CHECK(p.where->a->col == bound_column{1, 0});
  CHECK(p.where->a->nullable);  // right side of a left join

  REQUIRE(p.output_schema.columns.size() == 2);
  CHECK(p.output_schema.columns[0].name == "order_time");
  CHECK(p.output_schema.columns[0].type == column_type::timestamp_t);
  CHECK_FALSE(p.output_schema.columns[0].nullable);
  CHECK(p.output_schema.columns[1].name == "order_id");
  CHECK(p.output_schema.columns[1].type == column_type::int64_t_);
  CHECK_FALSE(p.output_schema.columns[1].nullable);
}

TEST_CASE("equality to NULL is rejected with a pointer at IS NULL") {
  std::string bad =
      "SELECT o.order_id FROM orders AS o LEFT JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' WEEK WHERE s.shipment_id = NULL";
  error e = capture_analyze_error(bad, two_inputs(), errc::type_error);
  CHECK(contains(e.what(), "IS NULL"));
}

TEST_CASE("missing select list positions the error at FROM") {
  parse_error e = capture_parse_error("SELECT FROM a");
  CHECK(e.line() == 1);
  CHECK(e.column() == 8);
  CHECK(contains(e.what(), "expected an expression"));
  CHECK(contains(e.what(), "FROM"));
}

TEST_CASE("expected token sets name what would have parsed") {
  parse_error e = capture_parse_error("SELECT x WHERE");
  REQUIRE(e.expected().size() == 1);
  CHECK(e.expected()[0] == "FROM");

  parse_error junk = capture_parse_error("SELECT x FROM a extra");
  CHECK(contains(junk.what(), "expected end of query"));
  CHECK(junk.column() == 17);

  parse_error unit = capture_parse_error(
      "SELECT x FROM a GROUP BY TUMBLE(event_time, INTERVAL '1' FORTNIGHT)");
  CHECK(unit.expected().size() == 5);
  CHECK(unit.expected()[0] == "SECOND");
  CHECK(unit.expected()[4] == "WEEK");
}

TEST_CASE("tumbling aggregation types the window and the aggregates") {
  typed_plan p = analyze(
      parse("SELECT region, COUNT(*) AS n, SUM(amount) AS total, "
            "AVG(amount) AS mean, MIN(order_time) AS first_seen "
            "FROM orders "
            "GROUP BY TUMBLE(event_time, INTERVAL '1' HOUR), region"),
      one_input());
  CHECK(p.cls == plan_class::windowed);
  CHECK(p.window_ms == 3600000);
  CHECK(temporal_reach_ms(p) == 3600000);
  REQUIRE(p.group_key.size() == 1);
  CHECK(p.group_key[0] == bound_column{0, 3});

  REQUIRE(p.output_schema.columns.size() == 5);
  CHECK(p.output_schema.columns[0].type == column_type::string_t);
  CHECK_FALSE(p.output_schema.columns[0].nullable);
  CHECK(p.output_schema.columns[1].type == column_type::int64_t_);
  CHECK_FALSE(p.output_schema.columns[1].nullable);
  CHECK(p.output_schema.columns[2].type == column_type::float64_t);
  CHECK(p.output_schema.columns[2].nullable);
  CHECK(p.output_schema.columns[3].type == column_type::float64_t);
  CHECK(p.output_schema.columns[3].nullable);
  CHECK(p.output_schema.columns[4].type == column_type::timestamp_t);
  CHECK_FALSE(p.output_schema.columns[4].nullable);

  CHECK(p.select[1].e->op == texpr_op::agg_count_star);
  CHECK(p.select[2].e->op == texpr_op::agg_sum);
  CHECK(p.select[2].e->a->col == bound_column{0, 2});
}

TEST_CASE("aggregate misuse is a type error") {
  auto inputs = one_input();
  capture_analyze_error(
      "SELECT SUM(region) AS s FROM orders "
      "GROUP BY TUMBLE(event_time, INTERVAL '1' HOUR)",
      inputs, errc::type_error);
  capture_analyze_error(
      "SELECT order_id FROM orders "
      "GROUP BY TUMBLE(event_time, INTERVAL '1' HOUR), region",
      inputs, errc::type_error);
  capture_analyze_error("SELECT COUNT(*) AS n FROM orders", inputs,
                        errc::type_error);
  capture_analyze_error(
      "SELECT region FROM orders "
      "WHERE COUNT(*) > 1 GROUP BY TUMBLE(event_time, INTERVAL '1' HOUR), "
      "region",
      inputs, errc::type_error);
  capture_analyze_error(
      "SELECT SUM(COUNT(*)) AS s FROM orders "
      "GROUP BY TUMBLE(event_time, INTERVAL '1' HOUR)",
      inputs, errc::type_error);
  capture_analyze_error(
      "SELECT COUNT(*) AS n FROM orders "
      "GROUP BY TUMBLE(event_time, INTERVAL '0' HOUR)",
      inputs, errc::type_error);
}

TEST_CASE("windowed WHERE filters before aggregation and sees all columns") {
  typed_plan p = analyze(
      parse("SELECT region, COUNT(*) AS n FROM orders "
            "WHERE amount > 100.0 "
            "GROUP BY TUMBLE(event_time, INTERVAL '1' DAY), region"),
      one_input());
  CHECK(p.cls == plan_class::windowed);
  REQUIRE(p.where != nullptr);
  CHECK(p.where->op == texpr_op::gt);
}

TEST_CASE("name resolution distinguishes unknown, ambiguous and unaliased") {
  capture_analyze_error("SELECT nope FROM orders", one_input(),
                        errc::unknown_column);
  capture_analyze_error("SELECT x.order_id FROM orders", one_input(),
                        errc::unknown_input_alias);
  capture_analyze_error("SELECT order_id FROM nowhere", one_input(),
                        errc::unknown_input_alias);

  std::string joined =
      "SELECT order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' DAY";
  capture_analyze_error(joined, two_inputs(), errc::ambiguous_column);
}

TEST_CASE("join shape violations") {
  parse_error no_between = capture_parse_error(
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id");
  CHECK(contains(no_between.what(), "BETWEEN"));

  parse_error no_eq = capture_parse_error(
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON s.shipment_time BETWEEN o.order_time AND o.order_time + "
      "INTERVAL '1' DAY");
  CHECK(contains(no_eq.what(), "equality"));

  parse_error two_between = capture_parse_error(
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id "
      "AND s.shipment_time BETWEEN o.order_time AND o.order_time + "
      "INTERVAL '1' DAY "
      "AND s.shipment_time BETWEEN o.order_time AND o.order_time + "
      "INTERVAL '2' DAY");
  CHECK(contains(two_between.what(), "one BETWEEN"));

  parse_error bounds = capture_parse_error(
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id "
      "AND s.shipment_time BETWEEN o.order_time AND o.order_id + "
      "INTERVAL '1' DAY");
  CHECK(contains(bounds.what(), "same left-side column"));

  parse_error right_join = capture_parse_error(
      "SELECT o.order_id FROM orders AS o RIGHT JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' DAY");
  CHECK(contains(right_join.what(), "only JOIN and LEFT JOIN"));

  capture_analyze_error(
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = o.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' DAY",
      two_inputs(), errc::type_error);

  capture_analyze_error(
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.region = s.shipment_time AND s.shipment_time BETWEEN "
      "o.order_time AND o.order_time + INTERVAL '1' DAY",
      two_inputs(), errc::type_error);

  // probe must come from the joined side
  capture_analyze_error(
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND o.order_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' DAY",
      two_inputs(), errc::type_error);
}

TEST_CASE("one stateful construct per query") {
  capture_analyze_error(
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' DAY "
      "GROUP BY TUMBLE(event_time, INTERVAL '1' HOUR)",
      two_inputs(), errc::unsupported_query);

  std::map<std::string, schema_def> twice = two_inputs();
  capture_analyze_error(
      "SELECT o.order_id FROM orders AS o JOIN orders AS p "
      "ON o.order_id = p.order_id AND p.order_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' DAY",
      twice, errc::unsupported_query);
}

TEST_CASE("BETWEEN may name the record event time of either side") {
  std::string q =
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.event_time BETWEEN o.event_time "
      "AND o.event_time + INTERVAL '1' DAY";
  typed_plan p = analyze(parse(q), two_inputs());
  CHECK(p.left_time == bound_column{0, k_envelope_column});
  CHECK(p.right_time == bound_column{1, k_envelope_column});
  CHECK(p.join_upper_ms == 86400000);
}

TEST_CASE("expression typing promotes ints, rejects everything else") {
  auto inputs = one_input();
  typed_plan p = analyze(
      parse("SELECT order_id / 2 AS half, amount * 2.0 AS dbl, "
            "order_time + INTERVAL '1' DAY AS due, "
            "-order_id AS neg, NOT (region = 'eu') AS out "
            "FROM orders"),
      inputs);
  CHECK(p.output_schema.columns[0].type == column_type::int64_t_);
  CHECK(p.output_schema.columns[1].type == column_type::float64_t);
  CHECK(p.output_schema.columns[2].type == column_type::timestamp_t);
  CHECK(p.output_schema.columns[3].type == column_type::int64_t_);
  CHECK(p.output_schema.columns[4].type == column_type::bool_t);

  capture_analyze_error("SELECT region + 1 AS x FROM orders", inputs,
                        errc::type_error);
  capture_analyze_error("SELECT order_id = region AS x FROM orders", inputs,
                        errc::type_error);
  capture_analyze_error("SELECT INTERVAL '1' DAY AS x FROM orders", inputs,
                        errc::type_error);
  capture_analyze_error("SELECT region + INTERVAL '1' DAY AS x FROM orders",
                        inputs, errc::type_error);
  capture_analyze_error("SELECT NOT order_id AS x FROM orders", inputs,
                        errc::type_error);
  capture_analyze_error("SELECT -region AS x FROM orders", inputs,
                        errc::type_error);
  capture_analyze_error("SELECT order_id FROM orders WHERE order_id + 1",
                        inputs, errc::type_error);
}

TEST_CASE("timestamp-shaped string literals compare as timestamps") {
  typed_plan p = analyze(
      parse("SELECT order_id FROM orders "
            "WHERE order_time > '2020-01-01T00:00:00Z'"),
      one_input());
  REQUIRE(p.where != nullptr);
  CHECK(p.where->b->op == texpr_op::literal);
  CHECK(p.where->b->lit.kind() == value_kind::time);

  typed_plan q = analyze(
      parse("SELECT order_id FROM orders "
            "WHERE order_time >= TIMESTAMP '2020-06-01T12:00:00Z'"),
      one_input());
  CHECK(q.where->b->lit.kind() == value_kind::time);

  parse_error bad = capture_parse_error(
      "SELECT order_id FROM orders WHERE order_time > TIMESTAMP 'noon'");
  CHECK(contains(bad.what(), "not a valid timestamp"));
}

TEST_CASE("output naming rules") {
  auto inputs = one_input();
  capture_analyze_error("SELECT order_id + 1 FROM orders", inputs,
                        errc::type_error);  // computed needs AS
  capture_analyze_error("SELECT order_id, amount AS order_id FROM orders",
                        inputs, errc::type_error);  // duplicate
  capture_analyze_error("SELECT order_id AS offset FROM orders", inputs,
                        errc::type_error);  // reserved
}

TEST_CASE("carry compatibility tracks everything but projection and filter") {
  auto plan_of = [&](const std::string& text) {
    return analyze(parse(text), two_inputs());
  };
  std::string base =
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' DAY";
  CHECK(carry_compatible(plan_of(base), plan_of(base)));

  // changed projection and added filter: still carryable
  std::string reproject =
      "SELECT o.order_time AS t FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '1' DAY WHERE o.amount IS NOT NULL";
  CHECK(carry_compatible(plan_of(base), plan_of(reproject)));

  // longer reach: not carryable
  std::string wider =
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.shipment_time BETWEEN o.order_time "
      "AND o.order_time + INTERVAL '2' DAY";
  CHECK_FALSE(carry_compatible(plan_of(base), plan_of(wider)));

  auto w1 = analyze(parse("SELECT region, COUNT(*) AS n FROM orders "
                          "GROUP BY TUMBLE(event_time, INTERVAL '1' HOUR), "
                          "region"),
                    one_input());
  auto w2 = analyze(parse("SELECT region, COUNT(*) AS n FROM orders "
                          "GROUP BY TUMBLE(event_time, INTERVAL '2' HOUR), "
                          "region"),
                    one_input());
  auto w3 = analyze(parse("SELECT region, MIN(amount) AS m FROM orders "
                          "GROUP BY TUMBLE(event_time, INTERVAL '1' HOUR), "
                          "region"),
                    one_input());
  auto w4 = analyze(parse("SELECT COUNT(*) AS n FROM orders "
                          "GROUP BY TUMBLE(event_time, INTERVAL '1' HOUR)"),
                    one_input());
  CHECK_FALSE(carry_compatible(w1, w2));  // window width changed
  CHECK(carry_compatible(w1, w3));        // only the aggregate changed
  CHECK_FALSE(carry_compatible(w1, w4));  // group key changed

  auto s1 = analyze(parse("SELECT order_id FROM orders"), one_input());
  CHECK_FALSE(carry_compatible(w1, s1));  // classification changed
}

TEST_CASE("printing reparses to a structurally identical query") {
  const char* cases[] = {
      "SELECT order_id FROM orders",
      k_antijoin,
      "SELECT region, COUNT(*) AS n, SUM(amount) AS total FROM orders "
      "WHERE amount > 9.5 "
      "GROUP BY TUMBLE(event_time, INTERVAL '15' MINUTE), region",
      "SELECT (order_id + 1) * 2 AS x, 'it''s' AS lit, TRUE AS t "
      "FROM orders WHERE NOT (region = 'eu') OR amount IS NOT NULL",
      "SELECT order_time + INTERVAL '3' SECOND AS due FROM orders "
      "WHERE order_time > TIMESTAMP '1999-12-31T23:59:59.999Z'",
      "SELECT o.order_id FROM orders AS o JOIN shipments AS s "
      "ON o.order_id = s.order_id AND s.event_time BETWEEN o.event_time "
      "AND o.event_time + INTERVAL '1' DAY",
      "SELECT amount / 0.5 AS x FROM orders WHERE amount <> 1.0e10",
  };
  for (const char* text : cases) {
    CAPTURE(text);
    ast::query q = parse(text);
    std::string printed = print(q);
    ast::query again = parse(printed);
    CHECK(ast::equal(q, again));
    CHECK(print(again) == printed);
  }
}

TEST_CASE("deeply nested expressions fail cleanly instead of overflowing") {
  std::string deep = "SELECT ";
  for (int i = 0; i < 500; i++) deep += "(";
  deep += "1";
  for (int i = 0; i < 500; i++) deep += ")";
  deep += " AS x FROM a";
  parse_error e = capture_parse_error(deep);
  CHECK(contains(e.what(), "nested too deeply"));
}

TEST_CASE("parser is total on hostile input") {
  uint64_t state = 0x9e3779b97f4a7c15ull;
  auto next = [&state]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
  };
  const std::string pieces[] = {
      "SELECT", "FROM",  "JOIN",    "LEFT",  "ON",        "WHERE",
      "GROUP",  "BY",    "TUMBLE",  "(",     ")",         ",",
      ".",      "*",     "+",       "-",     "/",         "=",
      "<>",     "<",     "BETWEEN", "AND",   "INTERVAL",  "'1'",
      "WEEK",   "COUNT", "IS",      "NULL",  "x",         "a.b",
      "'str",   "123",   "1.5e9",   "9e999", "TIMESTAMP", "''",
  };
  int parsed = 0;
  for (int round = 0; round < 20000; round++) {
    std::string text;
    size_t len = next() % 24;
    for (size_t i = 0; i < len; i++) {
      if (next() % 4 == 0) {
        text.push_back(static_cast<char>(next() % 256));
      } else {
        text += pieces[next() % std::size(pieces)];
        text.push_back(' ');
      }
    }
    try {
      (void)parse(text);
      parsed++;
    } catch (const parse_error&) {
    }
  }
  // Sanity: the generator occasionally produces a legal query.
  std::string ok = "SELECT x FROM a";
  CHECK_NOTHROW((void)parse(ok));
  (void)parsed;
}

TEST_CASE("mutated real queries neither crash nor loop") {
  uint64_t state = 42;
  auto next = [&state]() {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return state >> 33;
  };
  std::string base = k_antijoin;
  for (int round = 0; round < 5000; round++) {
    std::string text = base;
    int edits = 1 + next() % 4;
    for (int i = 0; i < edits; i++) {
      size_t pos = next() % text.size();
      switch (next() % 3) {
        case 0: text[pos] = static_cast<char>(next() % 256); break;
        case 1: text.erase(pos, 1); break;
        case 2: text.insert(pos, 1, static_cast<char>(next() % 128)); break;
      }
    }
    try {
      (void)parse(text);
    } catch (const parse_error&) {
    }
  }
}
