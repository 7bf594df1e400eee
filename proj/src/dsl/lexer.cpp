#include "dsl/lexer.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <map>

#include "core/errors.hpp"

namespace odf::dsl {

namespace {

const std::map<std::string, tok>& keyword_table() {
  static const std::map<std::string, tok> k = {
      {"select", tok::kw_select},   {"as", tok::kw_as},
      {"from", tok::kw_from},       {"left", tok::kw_left},
      {"join", tok::kw_join},       {"on", tok::kw_on},
      {"where", tok::kw_where},     {"group", tok::kw_group},
      {"by", tok::kw_by},           {"and", tok::kw_and},
      {"or", tok::kw_or},           {"not", tok::kw_not},
      {"is", tok::kw_is},           {"null", tok::kw_null},
      {"true", tok::kw_true},       {"false", tok::kw_false},
      {"between", tok::kw_between}, {"interval", tok::kw_interval},
      {"tumble", tok::kw_tumble},   {"timestamp", tok::kw_timestamp},
      {"count", tok::kw_count},     {"sum", tok::kw_sum},
      {"min", tok::kw_min},         {"max", tok::kw_max},
      {"avg", tok::kw_avg},         {"second", tok::kw_second},
      {"minute", tok::kw_minute},   {"hour", tok::kw_hour},
      {"day", tok::kw_day},         {"week", tok::kw_week},
      {"inner", tok::kw_inner},     {"outer", tok::kw_outer},
      {"right", tok::kw_right},     {"full", tok::kw_full},
      {"cross", tok::kw_cross},
  };
  return k;
}

[[noreturn]] void fail(int line, int col, const std::string& msg) {
  throw parse_error(errc::syntax_error,
                    std::string(errc_name(errc::syntax_error)) + ": " +
                        std::to_string(line) + ":" + std::to_string(col) +
                        ": " + msg,
                    line, col);
}

struct scanner {
  std::string_view s;
  size_t i = 0;
  int line = 1;
  int col = 1;

  bool done() const { return i >= s.size(); }
  char peek(size_t ahead = 0) const {
    return i + ahead < s.size() ? s[i + ahead] : '\0';
  }
  char take() {
    char c = s[i++];
    if (c == '\n') {
      line++;
      col = 1;
    } else {
      col++;
    }
    return c;
  }
};

bool ident_start(char c) {
  return c == '_' || std::isalpha(static_cast<unsigned char>(c));
}
bool ident_cont(char c) {
  return c == '_' || std::isalnum(static_cast<unsigned char>(c));
}

}  // namespace

std::string token_name(tok k) {
  switch (k) {
    case tok::end: return "end of input";
    case tok::ident: return "an identifier";
    case tok::int_lit: return "an integer";
    case tok::float_lit: return "a number";
    case tok::str_lit: return "a string";
    case tok::lparen: return "(";
    case tok::rparen: return ")";
    case tok::comma: return ",";
    case tok::dot: return ".";
    case tok::star: return "*";
    case tok::plus: return "+";
    case tok::minus: return "-";
    case tok::slash: return "/";
    case tok::eq: return "=";
    case tok::neq: return "<>";
    case tok::lt: return "<";
    case tok::le: return "<=";
    case tok::gt: return ">";
    case tok::ge: return ">=";
    case tok::kw_select: return "SELECT";
    case tok::kw_as: return "AS";
    case tok::kw_from: return "FROM";
    case tok::kw_left: return "LEFT";
    case tok::kw_join: return "JOIN";
    case tok::kw_on: return "ON";
    case tok::kw_where: return "WHERE";
    case tok::kw_group: return "GROUP";
    case tok::kw_by: return "BY";
    case tok::kw_and: return "AND";
    case tok::kw_or: return "OR";
    case tok::kw_not: return "NOT";
    case tok::kw_is: return "IS";
    case tok::kw_null: return "NULL";
    case tok::kw_true: return "TRUE";
    case tok::kw_false: return "FALSE";
    case tok::kw_between: return "BETWEEN";
    case tok::kw_interval: return "INTERVAL";
    case tok::kw_tumble: return "TUMBLE";
    case tok::kw_timestamp: return "TIMESTAMP";
    case tok::kw_count: return "COUNT";
    case tok::kw_sum: return "SUM";
    case tok::kw_min: return "MIN";
    case tok::kw_max: return "MAX";
    case tok::kw_avg: return "AVG";
    case tok::kw_second: return "SECOND";
    case tok::kw_minute: return "MINUTE";
    case tok::kw_hour: return "HOUR";
    case tok::kw_day: return "DAY";
    case tok::kw_week: return "WEEK";
    case tok::kw_inner: return "INNER";
    case tok::kw_outer: return "OUTER";
    case tok::kw_right: return "RIGHT";
    case tok::kw_full: return "FULL";
    case tok::kw_cross: return "CROSS";
  }
  return "?";
}

std::string describe(const token& t) {
  if (t.kind == tok::ident) return "identifier '" + t.text + "'";
  if (t.kind == tok::str_lit) return "a string literal";
  if (t.kind == tok::int_lit || t.kind == tok::float_lit)
    return "number '" + t.text + "'";
  return token_name(t.kind);
}

std::vector<token> lex(std::string_view text) {
  scanner sc{text};
  std::vector<token> out;
  for (;;) {
    while (!sc.done() && (sc.peek() == ' ' || sc.peek() == '\t' ||
                          sc.peek() == '\r' || sc.peek() == '\n')) {
      sc.take();
    }
    token t;
    t.line = sc.line;
    t.col = sc.col;
    if (sc.done()) {
      t.kind = tok::end;
      out.push_back(std::move(t));
      return out;
    }
    char c = sc.peek();
    if (ident_start(c)) {
      std::string word;
      while (!sc.done() && ident_cont(sc.peek())) word.push_back(sc.take());
      std::string lower = word;
      for (char& ch : lower)
        ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      auto it = keyword_table().find(lower);
      if (it != keyword_table().end()) {
        t.kind = it->second;
      } else {
        t.kind = tok::ident;
      }
      t.text = std::move(word);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::string num;
      bool is_float = false;
      while (!sc.done() && std::isdigit(static_cast<unsigned char>(sc.peek())))
        num.push_back(sc.take());
      if (sc.peek() == '.' &&
          std::isdigit(static_cast<unsigned char>(sc.peek(1)))) {
        is_float = true;
        num.push_back(sc.take());
        while (!sc.done() &&
               std::isdigit(static_cast<unsigned char>(sc.peek())))
          num.push_back(sc.take());
      }
      if (sc.peek() == 'e' || sc.peek() == 'E') {
        size_t ahead = 1;
        if (sc.peek(1) == '+' || sc.peek(1) == '-') ahead = 2;
        if (std::isdigit(static_cast<unsigned char>(sc.peek(ahead)))) {
          is_float = true;
          num.push_back(sc.take());
          if (sc.peek() == '+' || sc.peek() == '-') num.push_back(sc.take());
          while (!sc.done() &&
                 std::isdigit(static_cast<unsigned char>(sc.peek())))
            num.push_back(sc.take());
        }
      }
      if (!sc.done() && ident_start(sc.peek())) {
        fail(sc.line, sc.col, "unexpected character after number");
      }
      t.text = num;
      if (is_float) {
        t.kind = tok::float_lit;
        double d = 0;
        auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), d);
        if (ec != std::errc() || p != num.data() + num.size() ||
            !std::isfinite(d)) {
          fail(t.line, t.col, "number '" + num + "' is out of range");
        }
        t.float_value = d;
      } else {
        t.kind = tok::int_lit;
        int64_t v = 0;
        auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
        if (ec != std::errc() || p != num.data() + num.size()) {
          fail(t.line, t.col, "integer '" + num + "' is out of range");
        }
        t.int_value = v;
      }
    } else if (c == '\'') {
      sc.take();
      std::string body;
      for (;;) {
        if (sc.done()) fail(t.line, t.col, "unterminated string literal");
        char ch = sc.take();
        if (ch == '\'') {
          if (sc.peek() == '\'') {
            body.push_back('\'');
            sc.take();
            continue;
          }
          break;
        }
        body.push_back(ch);
      }
      t.kind = tok::str_lit;
      t.text = std::move(body);
    } else {
      sc.take();
      switch (c) {
        case '(': t.kind = tok::lparen; break;
        case ')': t.kind = tok::rparen; break;
        case ',': t.kind = tok::comma; break;
        case '.': t.kind = tok::dot; break;
        case '*': t.kind = tok::star; break;
        case '+': t.kind = tok::plus; break;
        case '-': t.kind = tok::minus; break;
        case '/': t.kind = tok::slash; break;
        case '=': t.kind = tok::eq; break;
        case '!':
          if (sc.peek() == '=') {
            sc.take();
            t.kind = tok::neq;
            break;
          }
          fail(t.line, t.col, "unexpected character '!'");
        case '<':
          if (sc.peek() == '>') {
            sc.take();
            t.kind = tok::neq;
          } else if (sc.peek() == '=') {
            sc.take();
            t.kind = tok::le;
          } else {
            t.kind = tok::lt;
          }
          break;
        case '>':
          if (sc.peek() == '=') {
            sc.take();
            t.kind = tok::ge;
          } else {
            t.kind = tok::gt;
          }
          break;
        default:
          fail(t.line, t.col,
               "unexpected character '" + std::string(1, c) + "'");
      }
    }
    out.push_back(std::move(t));
  }
}

}  // namespace odf::dsl
