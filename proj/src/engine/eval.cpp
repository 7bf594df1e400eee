#include <cmath>
#include <string>

#include "core/errors.hpp"
#include "core/util.hpp"
#include "engine/engine.hpp"

namespace odf::engine {

namespace {

using dsl::texpr_op;
using dsl::typed_expr;
using dsl::typed_plan;

// Either a plain row or a closed window's members; aggregates need the latter.
struct eval_ctx {
  const eval_row* row = nullptr;
  const std::vector<open_window::member>* window = nullptr;
  const typed_plan* plan = nullptr;
};

value eval(const typed_expr& e, const eval_ctx& cx);

const value* lookup(const value::map_t& payload, const std::string& name) {
  auto it = payload.find(name);
  return it == payload.end() ? nullptr : &it->second;
}

value read_column(const typed_expr& e, const value::map_t* payload,
                  const typed_plan& plan) {
  if (e.col.column == dsl::k_envelope_column) {
    raise(errc::eval_error, "the record event time is not a payload column");
  }
  if (payload == nullptr) return value::null();
  const std::string& name =
      plan.input_schemas[e.col.input].columns[e.col.column].name;
  const value* v = lookup(*payload, name);
  // Columns added by a later schema era read as null in older records.
  return v ? *v : value::null();
}

bool is_null(const value& v) { return v.kind() == value_kind::null; }

// long double has a 64-bit mantissa on x86-64, so int64 converts exactly.
long double widen(const value& v) {
  return v.kind() == value_kind::integer
             ? static_cast<long double>(v.as_int())
             : static_cast<long double>(v.as_float());
}

// Three-way compare of two non-null scalars of a comparable kind pair.
int cmp_scalar(const value& a, const value& b) {
  if (a.kind() == value_kind::integer && b.kind() == value_kind::integer) {
    return a.as_int() < b.as_int() ? -1 : a.as_int() > b.as_int() ? 1 : 0;
  }
  if (a.kind() == value_kind::floating || b.kind() == value_kind::floating) {
    long double x = widen(a);
    long double y = widen(b);
    return x < y ? -1 : x > y ? 1 : 0;
  }
  switch (a.kind()) {
    case value_kind::boolean:
      return int(a.as_bool()) - int(b.as_bool());
    case value_kind::string:
      return a.as_string() < b.as_string() ? -1
             : a.as_string() > b.as_string() ? 1
                                             : 0;
    case value_kind::time: {
      int64_t x = a.as_time().ms;
      int64_t y = b.as_time().ms;
      return x < y ? -1 : x > y ? 1 : 0;
    }
    default:
      raise(errc::eval_error, "values of this kind cannot be ordered");
  }
}

value arith(texpr_op op, const value& a, const value& b) {
  if (a.kind() == value_kind::integer && b.kind() == value_kind::integer) {
    int64_t x = a.as_int();
    int64_t y = b.as_int();
    int64_t out = 0;
    switch (op) {
      case texpr_op::add:
        if (!checked_add(x, y, out))
          raise(errc::arithmetic_overflow, "integer + overflowed");
        break;
      case texpr_op::subtract:
        if (!checked_sub(x, y, out))
          raise(errc::arithmetic_overflow, "integer - overflowed");
        break;
      case texpr_op::multiply:
        if (!checked_mul(x, y, out))
          raise(errc::arithmetic_overflow, "integer * overflowed");
        break;
      case texpr_op::divide:
        if (y == 0) raise(errc::eval_error, "division by zero");
        if (x == INT64_MIN && y == -1)
          raise(errc::arithmetic_overflow, "integer / overflowed");
        out = x / y;  // truncates toward zero
        break;
      default:
        raise(errc::eval_error, "not an arithmetic operator");
    }
    return value::integer(out);
  }
  double x = static_cast<double>(widen(a));
  double y = static_cast<double>(widen(b));
  double r = 0;
  switch (op) {
    case texpr_op::add: r = x + y; break;
    case texpr_op::subtract: r = x - y; break;
    case texpr_op::multiply: r = x * y; break;
    case texpr_op::divide: r = x / y; break;
    default:
      raise(errc::eval_error, "not an arithmetic operator");
  }
  if (!std::isfinite(r)) {
    raise(errc::eval_error, "float arithmetic did not stay finite");
  }
  return value::floating(r);
}

value eval_compare(texpr_op op, const value& a, const value& b) {
  if (is_null(a) || is_null(b)) return value::null();
  int c = cmp_scalar(a, b);
  bool r = false;
  switch (op) {
    case texpr_op::eq: r = c == 0; break;
    case texpr_op::ne: r = c != 0; break;
    case texpr_op::lt: r = c < 0; break;
    case texpr_op::le: r = c <= 0; break;
    case texpr_op::gt: r = c > 0; break;
    case texpr_op::ge: r = c >= 0; break;
    default: raise(errc::eval_error, "not a comparison");
  }
  return value::boolean(r);
}

value eval_agg(const typed_expr& e, const eval_ctx& cx) {
  const auto& rows = *cx.window;
  if (e.op == texpr_op::agg_count_star) {
    return value::integer(static_cast<int64_t>(rows.size()));
  }
  // Argument values per member row, nulls skipped by every aggregate.
  std::vector<value> vals;
  vals.reserve(rows.size());
  for (const open_window::member& m : rows) {
    eval_row r;
    r.input[0] = &m.payload;
    eval_ctx inner{&r, nullptr, cx.plan};
    value v = eval(*e.a, inner);
    if (!is_null(v)) vals.push_back(std::move(v));
  }
  switch (e.op) {
    case texpr_op::agg_count:
      return value::integer(static_cast<int64_t>(vals.size()));
    case texpr_op::agg_sum: {
      if (vals.empty()) return value::null();
      if (e.type == column_type::int64_t_) {
        int64_t acc = 0;
        for (const value& v : vals) {
          if (!checked_add(acc, v.as_int(), acc))
            raise(errc::arithmetic_overflow, "SUM overflowed");
        }
        return value::integer(acc);
      }
      double acc = 0;
      for (const value& v : vals) acc += v.as_float();
      if (!std::isfinite(acc))
        raise(errc::eval_error, "SUM did not stay finite");
      return value::floating(acc);
    }
    case texpr_op::agg_avg: {
      if (vals.empty()) return value::null();
      long double acc = 0;
      for (const value& v : vals) acc += widen(v);
      double r = static_cast<double>(acc / vals.size());
      if (!std::isfinite(r))
        raise(errc::eval_error, "AVG did not stay finite");
      return value::floating(r);
    }
    case texpr_op::agg_min:
    case texpr_op::agg_max: {
      if (vals.empty()) return value::null();
      size_t best = 0;
      for (size_t i = 1; i < vals.size(); i++) {
        int c = cmp_scalar(vals[i], vals[best]);
        if (e.op == texpr_op::agg_min ? c < 0 : c > 0) best = i;
      }
      return vals[best];
    }
    default:
      raise(errc::eval_error, "not an aggregate");
  }
}

value eval(const typed_expr& e, const eval_ctx& cx) {
  switch (e.op) {
    case texpr_op::column: {
      if (cx.window) {
        // Group columns are constant across the window; read the first row.
        if (cx.window->empty()) return value::null();
        return read_column(e, &cx.window->front().payload, *cx.plan);
      }
      return read_column(e, cx.row->input[e.col.input], *cx.plan);
    }
    case texpr_op::literal:
      return e.lit;
    case texpr_op::negate: {
      value a = eval(*e.a, cx);
      if (is_null(a)) return a;
      if (a.kind() == value_kind::integer) {
        if (a.as_int() == INT64_MIN)
          raise(errc::arithmetic_overflow, "integer negation overflowed");
        return value::integer(-a.as_int());
      }
      return value::floating(-a.as_float());
    }
    case texpr_op::logical_not: {
      value a = eval(*e.a, cx);
      if (is_null(a)) return a;
      return value::boolean(!a.as_bool());
    }
    case texpr_op::add:
    case texpr_op::subtract:
    case texpr_op::multiply:
    case texpr_op::divide: {
      value a = eval(*e.a, cx);
      value b = eval(*e.b, cx);
      if (is_null(a) || is_null(b)) return value::null();
      return arith(e.op, a, b);
    }
    case texpr_op::time_shift: {
      value a = eval(*e.a, cx);
      if (is_null(a)) return a;
      int64_t ms = 0;
      if (!checked_add(a.as_time().ms, e.interval_ms, ms) ||
          ms < k_timestamp_min_ms || ms > k_timestamp_max_ms) {
        raise(errc::eval_error,
              "timestamp arithmetic left the representable range");
      }
      return value::time_ms(ms);
    }
    case texpr_op::eq:
    case texpr_op::ne:
    case texpr_op::lt:
    case texpr_op::le:
    case texpr_op::gt:
    case texpr_op::ge:
      return eval_compare(e.op, eval(*e.a, cx), eval(*e.b, cx));
    case texpr_op::logical_and: {
      value a = eval(*e.a, cx);
      if (!is_null(a) && !a.as_bool()) return value::boolean(false);
      value b = eval(*e.b, cx);
      if (!is_null(b) && !b.as_bool()) return value::boolean(false);
      if (is_null(a) || is_null(b)) return value::null();
      return value::boolean(true);
    }
    case texpr_op::logical_or: {
      value a = eval(*e.a, cx);
      if (!is_null(a) && a.as_bool()) return value::boolean(true);
      value b = eval(*e.b, cx);
      if (!is_null(b) && b.as_bool()) return value::boolean(true);
      if (is_null(a) || is_null(b)) return value::null();
      return value::boolean(false);
    }
    case texpr_op::is_null:
      return value::boolean(is_null(eval(*e.a, cx)));
    case texpr_op::is_not_null:
      return value::boolean(!is_null(eval(*e.a, cx)));
    default: {
      if (!cx.window) {
        raise(errc::eval_error, "aggregates only exist inside a window");
      }
      return eval_agg(e, cx);
    }
  }
}

}  // namespace

value eval_scalar(const typed_expr& e, const eval_row& row,
                  const typed_plan& plan) {
  eval_ctx cx{&row, nullptr, &plan};
  return eval(e, cx);
}

value eval_windowed(const typed_expr& e,
                    const std::vector<open_window::member>& rows,
                    const typed_plan& plan) {
  eval_ctx cx{nullptr, &rows, &plan};
  return eval(e, cx);
}

bool eval_predicate(const typed_expr& e, const eval_row& row,
                    const typed_plan& plan) {
  value v = eval_scalar(e, row, plan);
  return v.kind() == value_kind::boolean && v.as_bool();
}

}  // namespace odf::engine
