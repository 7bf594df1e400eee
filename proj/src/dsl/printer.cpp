#include <string>

#include "core/errors.hpp"
#include "dsl/dsl.hpp"

// Canonical single-line rendering. Every compound expression is
// parenthesized, so the output reparses to the same tree without any
// precedence reasoning here.

namespace odf::dsl {

namespace {

std::string print_expr(const ast::expr& e);

std::string print_column(const ast::column_ref& c) {
  return c.qualifier.empty() ? c.name : c.qualifier + "." + c.name;
}

std::string print_interval(const ast::interval_lit& iv) {
  return "INTERVAL '" + std::to_string(iv.count) + "' " + unit_name(iv.unit);
}

std::string quote_sql(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    out.push_back(c);
    if (c == '\'') out.push_back('\'');
  }
  out.push_back('\'');
  return out;
}

std::string print_literal(const value& v) {
  switch (v.kind()) {
    case value_kind::null:
      return "NULL";
    case value_kind::boolean:
      return v.as_bool() ? "TRUE" : "FALSE";
    case value_kind::integer:
    case value_kind::floating:
      return canonical_encode(v);
    case value_kind::string:
      return quote_sql(v.as_string());
    case value_kind::time: {
      std::string enc = canonical_encode(v);  // "\"....Z\""
      return "TIMESTAMP '" + enc.substr(1, enc.size() - 2) + "'";
    }
    default:
      raise(errc::unsupported_value, "literal kind cannot be printed");
  }
}

std::string print_expr(const ast::expr& e) {
  if (const auto* c = std::get_if<ast::column_ref>(&e.node))
    return print_column(*c);
  if (const auto* l = std::get_if<ast::literal>(&e.node))
    return print_literal(l->v);
  if (const auto* iv = std::get_if<ast::interval_lit>(&e.node))
    return print_interval(*iv);
  if (const auto* u = std::get_if<ast::unary_op>(&e.node)) {
    if (u->op == "-") return "(-" + print_expr(*u->operand) + ")";
    return "(NOT " + print_expr(*u->operand) + ")";
  }
  if (const auto* b = std::get_if<ast::binary_op>(&e.node)) {
    return "(" + print_expr(*b->lhs) + " " + b->op + " " +
           print_expr(*b->rhs) + ")";
  }
  if (const auto* nt = std::get_if<ast::null_test>(&e.node)) {
    return "(" + print_expr(*nt->operand) +
           (nt->negated ? " IS NOT NULL)" : " IS NULL)");
  }
  const auto& call = std::get<ast::agg_call>(e.node);
  if (call.star) return call.fn + "(*)";
  return call.fn + "(" + print_expr(*call.arg) + ")";
}

std::string print_table(const ast::table_ref& t) {
  if (t.alias == t.table) return t.table;
  return t.table + " AS " + t.alias;
}

}  // namespace

std::string print(const ast::query& q) {
  std::string out = "SELECT ";
  for (size_t i = 0; i < q.select.size(); i++) {
    if (i) out += ", ";
    out += print_expr(q.select[i].e);
    if (q.select[i].as_name) out += " AS " + *q.select[i].as_name;
  }
  out += " FROM " + print_table(q.from);
  if (q.join) {
    out += q.join->left_outer ? " LEFT JOIN " : " JOIN ";
    out += print_table(q.join->right);
    out += " ON ";
    for (size_t i = 0; i < q.join->equalities.size(); i++) {
      if (i) out += " AND ";
      out += print_column(q.join->equalities[i].first) + " = " +
             print_column(q.join->equalities[i].second);
    }
    out += " AND " + print_column(q.join->probe_time) + " BETWEEN " +
           print_column(q.join->anchor_time) + " AND " +
           print_column(q.join->anchor_time) + " + " +
           print_interval(q.join->upper);
  }
  if (q.where) {
    out += " WHERE " + print_expr(*q.where);
  }
  if (q.group) {
    out += " GROUP BY TUMBLE(event_time, " + print_interval(q.group->width) +
           ")";
    for (const ast::column_ref& key : q.group->keys) {
      out += ", " + print_column(key);
    }
  }
  return out;
}

namespace ast {

// Print-based comparison: the canonical rendering is injective on the
// structure print preserves, which is exactly the equality tests need.
bool equal(const query& a, const query& b) { return print(a) == print(b); }

}  // namespace ast

}  // namespace odf::dsl
