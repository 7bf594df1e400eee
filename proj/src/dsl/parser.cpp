#include <charconv>
#include <memory>
#include <utility>

#include "core/errors.hpp"
#include "core/util.hpp"
#include "dsl/dsl.hpp"
#include "dsl/lexer.hpp"

namespace odf::dsl {

int64_t unit_ms(time_unit u) {
  switch (u) {
    case time_unit::second: return 1000;
    case time_unit::minute: return 60 * 1000;
    case time_unit::hour: return 3600 * 1000;
    case time_unit::day: return 86400LL * 1000;
    case time_unit::week: return 7 * 86400LL * 1000;
  }
  return 0;
}

const char* unit_name(time_unit u) {
  switch (u) {
    case time_unit::second: return "SECOND";
    case time_unit::minute: return "MINUTE";
    case time_unit::hour: return "HOUR";
    case time_unit::day: return "DAY";
    case time_unit::week: return "WEEK";
  }
  return "?";
}

namespace {

constexpr int k_max_expr_depth = 200;

struct parser {
  std::vector<token> toks;
  size_t pos = 0;
  int depth = 0;

  const token& cur() const { return toks[pos]; }
  bool at(tok k) const { return cur().kind == k; }
  bool accept(tok k) {
    if (!at(k)) return false;
    pos++;
    return true;
  }
  token take() { return toks[pos++]; }

  [[noreturn]] void fail_at(const token& t, const std::string& msg,
                            std::vector<std::string> expected = {}) {
    throw parse_error(errc::syntax_error,
                      std::string(errc_name(errc::syntax_error)) + ": " +
                          std::to_string(t.line) + ":" +
                          std::to_string(t.col) + ": " + msg,
                      t.line, t.col, std::move(expected));
  }

  token expect(tok k) {
    if (!at(k)) {
      fail_at(cur(), "expected " + token_name(k) + ", got " + describe(cur()),
              {token_name(k)});
    }
    return take();
  }

  struct depth_guard {
    parser* p;
    explicit depth_guard(parser* pp) : p(pp) {
      if (++p->depth > k_max_expr_depth)
        p->fail_at(p->cur(), "expression is nested too deeply");
    }
    ~depth_guard() { p->depth--; }
  };

  ast::expr_ptr wrap(ast::expr e) {
    return std::make_unique<ast::expr>(std::move(e));
  }

  ast::column_ref parse_column_ref() {
    token first = expect(tok::ident);
    ast::column_ref r;
    r.line = first.line;
    r.col = first.col;
    if (accept(tok::dot)) {
      token second = expect(tok::ident);
      r.qualifier = first.text;
      r.name = second.text;
    } else {
      r.name = first.text;
    }
    return r;
  }

  ast::interval_lit parse_interval() {
    token kw = expect(tok::kw_interval);
    token body = expect(tok::str_lit);
    int64_t count = 0;
    const char* b = body.text.data();
    const char* e = b + body.text.size();
    auto [p, ec] = std::from_chars(b, e, count);
    if (body.text.empty() || ec != std::errc() || p != e || count < 0) {
      fail_at(body,
              "interval count must be a whole number of units, like "
              "INTERVAL '1' HOUR");
    }
    ast::interval_lit iv;
    iv.count = count;
    iv.line = kw.line;
    iv.col = kw.col;
    switch (cur().kind) {
      case tok::kw_second: iv.unit = time_unit::second; break;
      case tok::kw_minute: iv.unit = time_unit::minute; break;
      case tok::kw_hour: iv.unit = time_unit::hour; break;
      case tok::kw_day: iv.unit = time_unit::day; break;
      case tok::kw_week: iv.unit = time_unit::week; break;
      default:
        fail_at(cur(), "expected an interval unit, got " + describe(cur()),
                {"SECOND", "MINUTE", "HOUR", "DAY", "WEEK"});
    }
    take();
    return iv;
  }

  ast::expr parse_agg(const token& fn) {
    ast::agg_call call;
    call.fn = token_name(fn.kind);
    call.line = fn.line;
    call.col = fn.col;
    expect(tok::lparen);
    if (fn.kind == tok::kw_count && at(tok::star)) {
      take();
      call.star = true;
    } else {
      call.arg = wrap(parse_expr());
    }
    expect(tok::rparen);
    return ast::expr{std::move(call)};
  }

  ast::expr parse_primary() {
    depth_guard g(this);
    const token& t = cur();
    switch (t.kind) {
      case tok::int_lit: {
        token lit = take();
        return ast::expr{
            ast::literal{value::integer(lit.int_value), lit.line, lit.col}};
      }
      case tok::float_lit: {
        token lit = take();
        return ast::expr{
            ast::literal{value::floating(lit.float_value), lit.line, lit.col}};
      }
      case tok::str_lit: {
        token lit = take();
        // Timestamp-shaped text is a timestamp; string columns never hold it.
        value v;
        if (auto ms = parse_timestamp_lenient(lit.text)) {
          v = value::time_ms(*ms);
        } else {
          v = value::string(lit.text);
        }
        return ast::expr{ast::literal{std::move(v), lit.line, lit.col}};
      }
      case tok::kw_true:
      case tok::kw_false: {
        token lit = take();
        return ast::expr{ast::literal{
            value::boolean(lit.kind == tok::kw_true), lit.line, lit.col}};
      }
      case tok::kw_null: {
        token lit = take();
        return ast::expr{ast::literal{value::null(), lit.line, lit.col}};
      }
      case tok::kw_timestamp: {
        token kw = take();
        token body = expect(tok::str_lit);
        auto ms = parse_timestamp_lenient(body.text);
        if (!ms) {
          fail_at(body,
                  "'" + body.text +
                      "' is not a valid timestamp; use ISO-8601 like "
                      "2020-01-01T00:00:00Z");
        }
        return ast::expr{ast::literal{value::time_ms(*ms), kw.line, kw.col}};
      }
      case tok::kw_interval:
        return ast::expr{parse_interval()};
      case tok::kw_count:
      case tok::kw_sum:
      case tok::kw_min:
      case tok::kw_max:
      case tok::kw_avg: {
        token fn = take();
        return parse_agg(fn);
      }
      case tok::lparen: {
        take();
        ast::expr inner = parse_expr();
        expect(tok::rparen);
        return inner;
      }
      case tok::ident:
        return ast::expr{parse_column_ref()};
      default:
        fail_at(t, "expected an expression, got " + describe(t),
                {"an expression"});
    }
  }

  ast::expr parse_unary() {
    depth_guard g(this);
    if (at(tok::minus)) {
      token op = take();
      ast::unary_op u;
      u.op = "-";
      u.line = op.line;
      u.col = op.col;
      u.operand = wrap(parse_unary());
      return ast::expr{std::move(u)};
    }
    return parse_primary();
  }

  ast::expr parse_mul() {
    ast::expr lhs = parse_unary();
    while (at(tok::star) || at(tok::slash)) {
      token op = take();
      ast::binary_op b;
      b.op = op.kind == tok::star ? "*" : "/";
      b.line = op.line;
      b.col = op.col;
      b.lhs = wrap(std::move(lhs));
      b.rhs = wrap(parse_unary());
      lhs = ast::expr{std::move(b)};
    }
    return lhs;
  }

  ast::expr parse_add() {
    ast::expr lhs = parse_mul();
    while (at(tok::plus) || at(tok::minus)) {
      token op = take();
      ast::binary_op b;
      b.op = op.kind == tok::plus ? "+" : "-";
      b.line = op.line;
      b.col = op.col;
      b.lhs = wrap(std::move(lhs));
      b.rhs = wrap(parse_mul());
      lhs = ast::expr{std::move(b)};
    }
    return lhs;
  }

  ast::expr parse_comparison() {
    ast::expr lhs = parse_add();
    for (;;) {
      if (at(tok::kw_is)) {
        token is = take();
        bool negated = accept(tok::kw_not);
        expect(tok::kw_null);
        ast::null_test nt;
        nt.negated = negated;
        nt.line = is.line;
        nt.col = is.col;
        nt.operand = wrap(std::move(lhs));
        lhs = ast::expr{std::move(nt)};
        continue;
      }
      const char* spell = nullptr;
      switch (cur().kind) {
        case tok::eq: spell = "="; break;
        case tok::neq: spell = "<>"; break;
        case tok::lt: spell = "<"; break;
        case tok::le: spell = "<="; break;
        case tok::gt: spell = ">"; break;
        case tok::ge: spell = ">="; break;
        default: return lhs;
      }
      token op = take();
      ast::binary_op b;
      b.op = spell;
      b.line = op.line;
      b.col = op.col;
      b.lhs = wrap(std::move(lhs));
      b.rhs = wrap(parse_add());
      lhs = ast::expr{std::move(b)};
    }
  }

  ast::expr parse_not() {
    depth_guard g(this);
    if (at(tok::kw_not)) {
      token op = take();
      ast::unary_op u;
      u.op = "NOT";
      u.line = op.line;
      u.col = op.col;
      u.operand = wrap(parse_not());
      return ast::expr{std::move(u)};
    }
    return parse_comparison();
  }

  ast::expr parse_and() {
    ast::expr lhs = parse_not();
    while (at(tok::kw_and)) {
      token op = take();
      ast::binary_op b;
      b.op = "AND";
      b.line = op.line;
      b.col = op.col;
      b.lhs = wrap(std::move(lhs));
      b.rhs = wrap(parse_not());
      lhs = ast::expr{std::move(b)};
    }
    return lhs;
  }

  ast::expr parse_expr() {
    depth_guard g(this);
    ast::expr lhs = parse_and();
    while (at(tok::kw_or)) {
      token op = take();
      ast::binary_op b;
      b.op = "OR";
      b.line = op.line;
      b.col = op.col;
      b.lhs = wrap(std::move(lhs));
      b.rhs = wrap(parse_and());
      lhs = ast::expr{std::move(b)};
    }
    return lhs;
  }

  ast::table_ref parse_table_ref() {
    token name = expect(tok::ident);
    ast::table_ref r;
    r.table = name.text;
    r.alias = name.text;
    r.line = name.line;
    r.col = name.col;
    if (accept(tok::kw_as)) {
      token alias = expect(tok::ident);
      r.alias = alias.text;
    }
    return r;
  }

  // One ON conjunct: either `col = col` or the temporal bound
  // `col BETWEEN col AND col + INTERVAL 'n' UNIT`.
  void parse_on_conjunct(ast::join_clause& join, bool& saw_between,
                         const token& on_tok) {
    ast::column_ref first = parse_column_ref();
    if (accept(tok::eq)) {
      ast::column_ref second = parse_column_ref();
      join.equalities.emplace_back(std::move(first), std::move(second));
      return;
    }
    if (at(tok::kw_between)) {
      token bt = take();
      if (saw_between)
        fail_at(bt, "only one BETWEEN condition per join");
      saw_between = true;
      join.probe_time = std::move(first);
      ast::column_ref lo = parse_column_ref();
      expect(tok::kw_and);
      ast::column_ref hi = parse_column_ref();
      if (lo.qualifier != hi.qualifier || lo.name != hi.name) {
        fail_at(bt, "the BETWEEN bounds must name the same left-side column");
      }
      expect(tok::plus);
      join.anchor_time = std::move(lo);
      join.upper = parse_interval();
      return;
    }
    (void)on_tok;
    fail_at(cur(),
            "expected = or BETWEEN after the column, got " + describe(cur()),
            {"=", "BETWEEN"});
  }

  ast::query parse_query() {
    expect(tok::kw_select);
    ast::query q;
    for (;;) {
      ast::select_item item;
      item.e = parse_expr();
      if (accept(tok::kw_as)) {
        token name = expect(tok::ident);
        item.as_name = name.text;
      }
      q.select.push_back(std::move(item));
      if (!accept(tok::comma)) break;
    }
    expect(tok::kw_from);
    q.from = parse_table_ref();

    if (at(tok::kw_inner) || at(tok::kw_right) || at(tok::kw_full) ||
        at(tok::kw_cross) ||
        (at(tok::kw_left) && toks[pos + 1].kind == tok::kw_outer)) {
      fail_at(cur(), "only JOIN and LEFT JOIN are supported");
    }
    if (at(tok::kw_left) || at(tok::kw_join)) {
      ast::join_clause join;
      if (accept(tok::kw_left)) join.left_outer = true;
      expect(tok::kw_join);
      join.right = parse_table_ref();
      token on_tok = expect(tok::kw_on);
      bool saw_between = false;
      do {
        parse_on_conjunct(join, saw_between, on_tok);
      } while (accept(tok::kw_and));
      if (join.equalities.empty()) {
        fail_at(on_tok, "a join needs at least one column equality");
      }
      if (!saw_between) {
        fail_at(on_tok,
                "a join must bound event-time distance with BETWEEN ... AND "
                "... + INTERVAL");
      }
      q.join = std::move(join);
    }

    if (accept(tok::kw_where)) {
      q.where = parse_expr();
    }

    if (at(tok::kw_group)) {
      take();
      expect(tok::kw_by);
      expect(tok::kw_tumble);
      expect(tok::lparen);
      token first = cur();
      if (first.kind != tok::ident || first.text != "event_time" ||
          toks[pos + 1].kind == tok::dot) {
        fail_at(first,
                "TUMBLE's first argument must be event_time, the record "
                "event time");
      }
      take();
      expect(tok::comma);
      ast::tumble_clause tc;
      tc.width = parse_interval();
      expect(tok::rparen);
      while (accept(tok::comma)) {
        tc.keys.push_back(parse_column_ref());
      }
      q.group = std::move(tc);
    }

    if (!at(tok::end)) {
      fail_at(cur(), "expected end of query, got " + describe(cur()),
              {"end of input"});
    }
    return q;
  }
};

}  // namespace

ast::query parse(std::string_view text) {
  parser p;
  p.toks = lex(text);
  return p.parse_query();
}

}  // namespace odf::dsl
