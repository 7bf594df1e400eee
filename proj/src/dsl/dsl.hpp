#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "core/schema.hpp"
#include "core/value.hpp"

// Streaming query dialect:
//
//   SELECT item [, item ...]
//   FROM table [AS alias]
//   [[LEFT] JOIN table [AS alias]
//       ON a.k = b.k [AND ...]
//       AND b.t BETWEEN a.t AND a.t + INTERVAL 'n' UNIT]
//   [WHERE predicate]
//   [GROUP BY TUMBLE(event_time, INTERVAL 'n' UNIT) [, column ...]]
//
// Keywords are case-insensitive, identifiers are not. At most one stateful
// construct (JOIN or GROUP BY) per query. parse() is total: any byte string
// either yields an AST or a parse_error with a 1-based line:column position.

namespace odf::dsl {

enum class time_unit { second, minute, hour, day, week };
int64_t unit_ms(time_unit u);
const char* unit_name(time_unit u);

namespace ast {

struct expr;
using expr_ptr = std::unique_ptr<expr>;

struct column_ref {
  std::string qualifier;  // empty when unqualified
  std::string name;
  int line = 0;
  int col = 0;
};

struct literal {
  value v;  // null, boolean, integer, floating, string or time
  int line = 0;
  int col = 0;
};

struct interval_lit {
  int64_t count = 0;
  time_unit unit = time_unit::second;
  int line = 0;
  int col = 0;
};

// op is the token spelling: "-" or "NOT" for unary; "+", "-", "*", "/", "=",
// "<>", "<", "<=", ">", ">=", "AND", "OR" for binary.
struct unary_op {
  std::string op;
  expr_ptr operand;
  int line = 0;
  int col = 0;
};

struct binary_op {
  std::string op;
  expr_ptr lhs;
  expr_ptr rhs;
  int line = 0;
  int col = 0;
};

struct null_test {
  expr_ptr operand;
  bool negated = false;
  int line = 0;
  int col = 0;
};

// fn is COUNT, SUM, MIN, MAX or AVG. star only with COUNT.
struct agg_call {
  std::string fn;
  expr_ptr arg;  // null when star
  bool star = false;
  int line = 0;
  int col = 0;
};

struct expr {
  std::variant<column_ref, literal, interval_lit, unary_op, binary_op,
               null_test, agg_call>
      node;
};

struct select_item {
  expr e;
  std::optional<std::string> as_name;
};

struct table_ref {
  std::string table;
  std::string alias;  // defaults to table
  int line = 0;
  int col = 0;
};

struct join_clause {
  bool left_outer = false;
  table_ref right;
  // Raw sides of each ON equality, in source order.
  std::vector<std::pair<column_ref, column_ref>> equalities;
  column_ref probe_time;   // the column before BETWEEN
  column_ref anchor_time;  // the lower bound; upper bound names the same column
  interval_lit upper;
};

struct tumble_clause {
  interval_lit width;
  std::vector<column_ref> keys;
};

struct query {
  std::vector<select_item> select;
  table_ref from;
  std::optional<join_clause> join;
  std::optional<expr> where;
  std::optional<tumble_clause> group;
};

bool equal(const query& a, const query& b);

}  // namespace ast

// Throws parse_error (errc::syntax_error).
ast::query parse(std::string_view text);

// Canonical rendering; parse(print(q)) is structurally equal to q.
std::string print(const ast::query& q);

enum class plan_class { stateless, windowed, joined };
const char* plan_class_name(plan_class c);

// Column bound to an input position. column == k_envelope_column refers to
// the record's envelope event time rather than a payload column.
inline constexpr size_t k_envelope_column = static_cast<size_t>(-1);

struct bound_column {
  size_t input = 0;
  size_t column = 0;
  bool operator==(const bound_column&) const = default;
};

enum class texpr_op {
  column,
  literal,
  negate,       // int or float
  logical_not,  // bool, three-valued
  add,
  subtract,
  multiply,
  divide,      // int division truncates; division by zero is an EvalError
  time_shift,  // timestamp +/- interval; interval_ms carries the signed shift
  eq,
  ne,
  lt,
  le,
  gt,
  ge,
  logical_and,  // three-valued
  logical_or,   // three-valued
  is_null,      // never null itself
  is_not_null,
  agg_count_star,
  agg_count,
  agg_sum,
  agg_min,
  agg_max,
  agg_avg,
};

struct typed_expr;
using texpr_ptr = std::unique_ptr<typed_expr>;

struct typed_expr {
  texpr_op op{};
  column_type type{};  // result type
  bool nullable = false;
  bound_column col{};      // op == column
  value lit;               // op == literal
  int64_t interval_ms = 0; // op == time_shift
  texpr_ptr a;
  texpr_ptr b;
};

struct select_col {
  std::string name;
  texpr_ptr e;
};

// What the engine executes. Inputs are positional; table_names records the
// first-appearance order (FROM, then JOIN) that SetTransform.inputs binds to.
struct typed_plan {
  plan_class cls = plan_class::stateless;
  std::vector<std::string> table_names;
  std::vector<std::string> aliases;
  std::vector<schema_def> input_schemas;
  std::vector<select_col> select;
  texpr_ptr where;  // null when absent; evaluated per class (see engine)

  // windowed
  int64_t window_ms = 0;
  std::vector<bound_column> group_key;

  // joined
  bool join_left_outer = false;
  std::vector<std::pair<bound_column, bound_column>> join_keys;  // (left, right)
  bound_column left_time{};
  bound_column right_time{};
  int64_t join_upper_ms = 0;

  schema_def output_schema;
};

// Name and type resolution. input_schemas is keyed by table name (not alias).
// Throws error with errc unknown_input_alias, unknown_column,
// ambiguous_column, type_error or unsupported_query.
typed_plan analyze(const ast::query& q,
                   const std::map<std::string, schema_def>& input_schemas);

plan_class classify(const typed_plan& p);

// How far back an output can depend on input event time: 0 for stateless,
// the window width for windowed, the join upper bound for joined plans.
int64_t temporal_reach_ms(const typed_plan& p);

// True when a checkpoint taken under `prev` may keep serving `next`: same
// classification and temporal reach, with only the projected expressions and
// the filter predicate allowed to differ.
bool carry_compatible(const typed_plan& prev, const typed_plan& next);

}  // namespace odf::dsl
