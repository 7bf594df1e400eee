#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "core/errors.hpp"
#include "core/util.hpp"
#include "dsl/dsl.hpp"

namespace odf::dsl {

namespace {

std::string at_pos(int line, int col) {
  return std::to_string(line) + ":" + std::to_string(col) + ": ";
}

// Aggregate placement: none allowed, allowed at this level (windowed select
// list), or already inside an aggregate argument.
enum class agg_ctx { forbidden, allowed, inside };

struct scope {
  const typed_plan* plan = nullptr;
  bool right_nullable = false;   // joined plans after a LEFT JOIN
  bool allow_envelope = false;   // BETWEEN operands may name alias.event_time
  // Windowed select lists may only read raw columns through the group key.
  const std::vector<bound_column>* must_be_grouped = nullptr;
};

struct resolved {
  bound_column col;
  column_type type;
  bool nullable;
};

resolved resolve_column(const ast::column_ref& ref, const scope& sc) {
  const typed_plan& p = *sc.plan;
  std::vector<size_t> hits;
  if (ref.qualifier.empty()) {
    for (size_t i = 0; i < p.aliases.size(); i++) {
      if (ref.name == "event_time" && sc.allow_envelope) continue;
      if (p.input_schemas[i].find(ref.name)) hits.push_back(i);
    }
    if (hits.empty()) {
      raise(errc::unknown_column,
            at_pos(ref.line, ref.col) + "unknown column '" + ref.name + "'");
    }
    if (hits.size() > 1) {
      raise(errc::ambiguous_column,
            at_pos(ref.line, ref.col) + "column '" + ref.name +
                "' exists in more than one input; qualify it");
    }
  } else {
    auto it = std::find(p.aliases.begin(), p.aliases.end(), ref.qualifier);
    if (it == p.aliases.end()) {
      raise(errc::unknown_input_alias,
            at_pos(ref.line, ref.col) + "unknown input alias '" +
                ref.qualifier + "'");
    }
    hits.push_back(static_cast<size_t>(it - p.aliases.begin()));
  }
  size_t input = hits[0];
  if (sc.allow_envelope && ref.name == "event_time") {
    return {{input, k_envelope_column}, column_type::timestamp_t, false};
  }
  const column_def* def = p.input_schemas[input].find(ref.name);
  if (!def) {
    raise(errc::unknown_column,
          at_pos(ref.line, ref.col) + "input '" + p.aliases[input] +
              "' has no column '" + ref.name + "'");
  }
  bool nullable = def->nullable;
  if (input == 1 && sc.right_nullable) nullable = true;
  size_t idx = static_cast<size_t>(def - p.input_schemas[input].columns.data());
  return {{input, idx}, def->type, nullable};
}

bool is_numeric(column_type t) {
  return t == column_type::int64_t_ || t == column_type::float64_t;
}

texpr_ptr make_texpr(texpr_op op, column_type type, bool nullable) {
  auto e = std::make_unique<typed_expr>();
  e->op = op;
  e->type = type;
  e->nullable = nullable;
  return e;
}

int64_t interval_to_ms(const ast::interval_lit& iv) {
  int64_t ms = 0;
  if (!checked_mul(iv.count, unit_ms(iv.unit), ms)) {
    raise(errc::type_error,
          at_pos(iv.line, iv.col) + "interval is too large");
  }
  return ms;
}

struct analyzer {
  texpr_ptr type_expr(const ast::expr& e, const scope& sc, agg_ctx agg);

  texpr_ptr type_column(const ast::column_ref& ref, const scope& sc,
                        agg_ctx agg) {
    resolved r = resolve_column(ref, sc);
    if (sc.must_be_grouped != nullptr && agg == agg_ctx::allowed) {
      bool grouped =
          std::find(sc.must_be_grouped->begin(), sc.must_be_grouped->end(),
                    r.col) != sc.must_be_grouped->end();
      if (!grouped) {
        raise(errc::type_error,
              at_pos(ref.line, ref.col) + "column '" + ref.name +
                  "' must appear in GROUP BY or inside an aggregate");
      }
    }
    auto out = make_texpr(texpr_op::column, r.type, r.nullable);
    out->col = r.col;
    return out;
  }

  texpr_ptr type_literal(const ast::literal& lit) {
    if (lit.v.kind() == value_kind::null) {
      raise(errc::type_error,
            at_pos(lit.line, lit.col) +
                "NULL cannot be used as a plain value; test for null with IS "
                "NULL or IS NOT NULL");
    }
    column_type t{};
    switch (lit.v.kind()) {
      case value_kind::boolean: t = column_type::bool_t; break;
      case value_kind::integer: t = column_type::int64_t_; break;
      case value_kind::floating: t = column_type::float64_t; break;
      case value_kind::string: t = column_type::string_t; break;
      case value_kind::time: t = column_type::timestamp_t; break;
      default:
        raise(errc::type_error, at_pos(lit.line, lit.col) +
                                    "unsupported literal in this dialect");
    }
    auto out = make_texpr(texpr_op::literal, t, false);
    out->lit = lit.v;
    return out;
  }

  texpr_ptr type_unary(const ast::unary_op& u, const scope& sc, agg_ctx agg) {
    texpr_ptr child = type_expr(*u.operand, sc, agg);
    if (u.op == "-") {
      if (!is_numeric(child->type)) {
        raise(errc::type_error,
              at_pos(u.line, u.col) + "unary - needs a numeric operand, got " +
                  column_type_name(child->type));
      }
      auto out = make_texpr(texpr_op::negate, child->type, child->nullable);
      out->a = std::move(child);
      return out;
    }
    if (child->type != column_type::bool_t) {
      raise(errc::type_error,
            at_pos(u.line, u.col) + "NOT needs a boolean operand, got " +
                column_type_name(child->type));
    }
    auto out = make_texpr(texpr_op::logical_not, column_type::bool_t,
                          child->nullable);
    out->a = std::move(child);
    return out;
  }

  texpr_ptr type_binary(const ast::binary_op& b, const scope& sc,
                        agg_ctx agg) {
    // Timestamp +/- INTERVAL folds the shift into one node.
    if ((b.op == "+" || b.op == "-") &&
        std::holds_alternative<ast::interval_lit>(b.rhs->node)) {
      const auto& iv = std::get<ast::interval_lit>(b.rhs->node);
      texpr_ptr lhs = type_expr(*b.lhs, sc, agg);
      if (lhs->type != column_type::timestamp_t) {
        raise(errc::type_error,
              at_pos(b.line, b.col) +
                  "INTERVAL can only shift a timestamp, got " +
                  column_type_name(lhs->type));
      }
      int64_t ms = interval_to_ms(iv);
      auto out = make_texpr(texpr_op::time_shift, column_type::timestamp_t,
                            lhs->nullable);
      out->interval_ms = b.op == "+" ? ms : -ms;
      out->a = std::move(lhs);
      return out;
    }

    texpr_ptr l = type_expr(*b.lhs, sc, agg);
    texpr_ptr r = type_expr(*b.rhs, sc, agg);
    bool nullable = l->nullable || r->nullable;

    if (b.op == "AND" || b.op == "OR") {
      if (l->type != column_type::bool_t || r->type != column_type::bool_t) {
        raise(errc::type_error,
              at_pos(b.line, b.col) + b.op + " needs boolean operands");
      }
      auto out = make_texpr(
          b.op == "AND" ? texpr_op::logical_and : texpr_op::logical_or,
          column_type::bool_t, nullable);
      out->a = std::move(l);
      out->b = std::move(r);
      return out;
    }

    bool comparison = b.op == "=" || b.op == "<>" || b.op == "<" ||
                      b.op == "<=" || b.op == ">" || b.op == ">=";
    bool arithmetic =
        b.op == "+" || b.op == "-" || b.op == "*" || b.op == "/";

    // int and float mix by promoting the int side; nothing else converts.
    bool compatible =
        l->type == r->type || (is_numeric(l->type) && is_numeric(r->type));
    if (!compatible) {
      raise(errc::type_error,
            at_pos(b.line, b.col) + "cannot apply " + b.op + " to " +
                column_type_name(l->type) + " and " +
                column_type_name(r->type));
    }

    if (comparison) {
      texpr_op op = b.op == "=" ? texpr_op::eq
                  : b.op == "<>" ? texpr_op::ne
                  : b.op == "<" ? texpr_op::lt
                  : b.op == "<=" ? texpr_op::le
                  : b.op == ">" ? texpr_op::gt
                                : texpr_op::ge;
      auto out = make_texpr(op, column_type::bool_t, nullable);
      out->a = std::move(l);
      out->b = std::move(r);
      return out;
    }

    if (arithmetic) {
      if (!is_numeric(l->type)) {
        raise(errc::type_error,
              at_pos(b.line, b.col) + b.op + " needs numeric operands, got " +
                  column_type_name(l->type));
      }
      column_type result = (l->type == column_type::float64_t ||
                            r->type == column_type::float64_t)
                               ? column_type::float64_t
                               : column_type::int64_t_;
      texpr_op op = b.op == "+" ? texpr_op::add
                  : b.op == "-" ? texpr_op::subtract
                  : b.op == "*" ? texpr_op::multiply
                                : texpr_op::divide;
      auto out = make_texpr(op, result, nullable);
      out->a = std::move(l);
      out->b = std::move(r);
      return out;
    }

    raise(errc::type_error, at_pos(b.line, b.col) + "unsupported operator");
  }

  texpr_ptr type_agg(const ast::agg_call& call, const scope& sc,
                     agg_ctx agg) {
    if (agg == agg_ctx::forbidden) {
      raise(errc::type_error,
            at_pos(call.line, call.col) + call.fn +
                " is an aggregate; aggregates need GROUP BY TUMBLE and may "
                "only appear in the select list");
    }
    if (agg == agg_ctx::inside) {
      raise(errc::type_error, at_pos(call.line, call.col) +
                                  "aggregates cannot be nested");
    }
    if (call.star) {
      return make_texpr(texpr_op::agg_count_star, column_type::int64_t_,
                        false);
    }
    texpr_ptr arg = type_expr(*call.arg, sc, agg_ctx::inside);
    if (call.fn == "COUNT") {
      auto out = make_texpr(texpr_op::agg_count, column_type::int64_t_, false);
      out->a = std::move(arg);
      return out;
    }
    if (call.fn == "SUM" || call.fn == "AVG") {
      if (!is_numeric(arg->type)) {
        raise(errc::type_error,
              at_pos(call.line, call.col) + call.fn +
                  " needs a numeric argument, got " +
                  column_type_name(arg->type));
      }
      column_type result = call.fn == "AVG" ? column_type::float64_t
                                            : arg->type;
      auto out = make_texpr(
          call.fn == "SUM" ? texpr_op::agg_sum : texpr_op::agg_avg, result,
          arg->nullable);
      out->a = std::move(arg);
      return out;
    }
    // MIN / MAX order any scalar type.
    auto out = make_texpr(
        call.fn == "MIN" ? texpr_op::agg_min : texpr_op::agg_max, arg->type,
        arg->nullable);
    out->a = std::move(arg);
    return out;
  }
};

texpr_ptr analyzer::type_expr(const ast::expr& e, const scope& sc,
                              agg_ctx agg) {
  if (const auto* c = std::get_if<ast::column_ref>(&e.node))
    return type_column(*c, sc, agg);
  if (const auto* l = std::get_if<ast::literal>(&e.node))
    return type_literal(*l);
  if (const auto* iv = std::get_if<ast::interval_lit>(&e.node)) {
    raise(errc::type_error,
          at_pos(iv->line, iv->col) +
              "INTERVAL may only appear as timestamp + INTERVAL or in "
              "TUMBLE and BETWEEN bounds");
  }
  if (const auto* u = std::get_if<ast::unary_op>(&e.node))
    return type_unary(*u, sc, agg);
  if (const auto* b = std::get_if<ast::binary_op>(&e.node))
    return type_binary(*b, sc, agg);
  if (const auto* nt = std::get_if<ast::null_test>(&e.node)) {
    texpr_ptr child = type_expr(*nt->operand, sc, agg);
    auto out = make_texpr(
        nt->negated ? texpr_op::is_not_null : texpr_op::is_null,
        column_type::bool_t, false);
    out->a = std::move(child);
    return out;
  }
  const auto& call = std::get<ast::agg_call>(e.node);
  return type_agg(call, sc, agg);
}

namespace {

// Output column name: AS wins, else a bare column reference names itself.
std::string output_name(const ast::select_item& item) {
  if (item.as_name) return *item.as_name;
  if (const auto* c = std::get_if<ast::column_ref>(&item.e.node))
    return c->name;
  raise(errc::type_error,
        "computed select expressions need AS <name>");
}

}  // namespace

}  // namespace

typed_plan analyze(const ast::query& q,
                   const std::map<std::string, schema_def>& input_schemas) {
  typed_plan plan;

  plan.table_names.push_back(q.from.table);
  plan.aliases.push_back(q.from.alias);
  if (q.join) {
    plan.table_names.push_back(q.join->right.table);
    plan.aliases.push_back(q.join->right.alias);
    if (q.join->right.table == q.from.table) {
      raise(errc::unsupported_query,
            "a dataset may appear only once per query");
    }
    if (q.join->right.alias == q.from.alias) {
      raise(errc::type_error,
            at_pos(q.join->right.line, q.join->right.col) +
                "both inputs are named '" + q.from.alias +
                "'; give one an alias");
    }
  }
  for (const std::string& t : plan.table_names) {
    auto it = input_schemas.find(t);
    if (it == input_schemas.end()) {
      raise(errc::unknown_input_alias, "unknown input dataset '" + t + "'");
    }
    plan.input_schemas.push_back(it->second);
  }

  if (q.join && q.group) {
    raise(errc::unsupported_query,
          "a query may use JOIN or GROUP BY, not both");
  }
  plan.cls = q.join     ? plan_class::joined
             : q.group ? plan_class::windowed
                       : plan_class::stateless;

  analyzer an;

  if (q.group) {
    plan.window_ms = interval_to_ms(q.group->width);
    if (plan.window_ms <= 0) {
      raise(errc::type_error, at_pos(q.group->width.line, q.group->width.col) +
                                  "the window width must be positive");
    }
    scope sc{&plan};
    for (const ast::column_ref& key : q.group->keys) {
      resolved r = resolve_column(key, sc);
      if (std::find(plan.group_key.begin(), plan.group_key.end(), r.col) !=
          plan.group_key.end()) {
        raise(errc::type_error, at_pos(key.line, key.col) +
                                    "duplicate GROUP BY column '" + key.name +
                                    "'");
      }
      plan.group_key.push_back(r.col);
    }
  }

  if (q.join) {
    plan.join_left_outer = q.join->left_outer;
    scope key_scope{&plan};
    for (const auto& [lraw, rraw] : q.join->equalities) {
      resolved a = resolve_column(lraw, key_scope);
      resolved b = resolve_column(rraw, key_scope);
      if (a.col.input == b.col.input) {
        raise(errc::type_error,
              at_pos(lraw.line, lraw.col) +
                  "a join key must pair one column from each input");
      }
      if (a.col.input == 1) std::swap(a, b);
      bool comparable = a.type == b.type ||
                        (is_numeric(a.type) && is_numeric(b.type));
      if (!comparable) {
        raise(errc::type_error,
              at_pos(lraw.line, lraw.col) + "join key types differ: " +
                  column_type_name(a.type) + " vs " +
                  column_type_name(b.type));
      }
      plan.join_keys.emplace_back(a.col, b.col);
    }
    scope time_scope{&plan};
    time_scope.allow_envelope = true;
    resolved probe = resolve_column(q.join->probe_time, time_scope);
    if (probe.col.input != 1 || probe.type != column_type::timestamp_t) {
      raise(errc::type_error,
            at_pos(q.join->probe_time.line, q.join->probe_time.col) +
                "the BETWEEN probe must be a timestamp column of the joined "
                "input");
    }
    resolved anchor = resolve_column(q.join->anchor_time, time_scope);
    if (anchor.col.input != 0 || anchor.type != column_type::timestamp_t) {
      raise(errc::type_error,
            at_pos(q.join->anchor_time.line, q.join->anchor_time.col) +
                "the BETWEEN bounds must be a timestamp column of the left "
                "input");
    }
    plan.right_time = probe.col;
    plan.left_time = anchor.col;
    plan.join_upper_ms = interval_to_ms(q.join->upper);
  }

  if (q.where) {
    scope sc{&plan};
    sc.right_nullable = plan.join_left_outer;
    texpr_ptr w = an.type_expr(*q.where, sc, agg_ctx::forbidden);
    if (w->type != column_type::bool_t) {
      raise(errc::type_error, "WHERE must be a boolean predicate, got " +
                                  std::string(column_type_name(w->type)));
    }
    plan.where = std::move(w);
  }

  std::set<std::string> seen_names;
  for (const ast::select_item& item : q.select) {
    std::string name = output_name(item);
    if (!is_identifier(name)) {
      raise(errc::type_error,
            "output column name '" + name + "' is not a plain identifier");
    }
    if (is_reserved_column_name(name)) {
      raise(errc::type_error,
            "output column name '" + name + "' is reserved");
    }
    if (!seen_names.insert(name).second) {
      raise(errc::type_error, "duplicate output column '" + name + "'");
    }
    scope sc{&plan};
    sc.right_nullable = plan.join_left_outer;
    agg_ctx agg = agg_ctx::forbidden;
    if (plan.cls == plan_class::windowed) {
      agg = agg_ctx::allowed;
      sc.must_be_grouped = &plan.group_key;
    }
    texpr_ptr e = an.type_expr(item.e, sc, agg);
    plan.output_schema.columns.push_back(
        column_def{name, e->type, e->nullable});
    plan.select.push_back(select_col{std::move(name), std::move(e)});
  }

  return plan;
}

plan_class classify(const typed_plan& p) { return p.cls; }

int64_t temporal_reach_ms(const typed_plan& p) {
  switch (p.cls) {
    case plan_class::stateless: return 0;
    case plan_class::windowed: return p.window_ms;
    case plan_class::joined: return p.join_upper_ms;
  }
  return 0;
}

const char* plan_class_name(plan_class c) {
  switch (c) {
    case plan_class::stateless: return "stateless";
    case plan_class::windowed: return "windowed";
    case plan_class::joined: return "joined";
  }
  return "?";
}

bool carry_compatible(const typed_plan& prev, const typed_plan& next) {
  return prev.cls == next.cls && prev.table_names == next.table_names &&
         prev.window_ms == next.window_ms &&
         prev.group_key == next.group_key &&
         prev.join_left_outer == next.join_left_outer &&
         prev.join_keys == next.join_keys &&
         prev.left_time == next.left_time &&
         prev.right_time == next.right_time &&
         prev.join_upper_ms == next.join_upper_ms;
}

}  // namespace odf::dsl
