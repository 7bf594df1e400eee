#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Token stream for the query dialect. Internal to src/dsl.

namespace odf::dsl {

enum class tok {
  end,
  ident,
  int_lit,
  float_lit,
  str_lit,
  // punctuation
  lparen,
  rparen,
  comma,
  dot,
  star,
  plus,
  minus,
  slash,
  eq,
  neq,  // <> or !=
  lt,
  le,
  gt,
  ge,
  // keywords
  kw_select,
  kw_as,
  kw_from,
  kw_left,
  kw_join,
  kw_on,
  kw_where,
  kw_group,
  kw_by,
  kw_and,
  kw_or,
  kw_not,
  kw_is,
  kw_null,
  kw_true,
  kw_false,
  kw_between,
  kw_interval,
  kw_tumble,
  kw_timestamp,
  kw_count,
  kw_sum,
  kw_min,
  kw_max,
  kw_avg,
  kw_second,
  kw_minute,
  kw_hour,
  kw_day,
  kw_week,
  // recognized so they can be rejected with a useful message
  kw_inner,
  kw_outer,
  kw_right,
  kw_full,
  kw_cross,
};

struct token {
  tok kind = tok::end;
  std::string text;     // identifier spelling or decoded string literal
  int64_t int_value = 0;
  double float_value = 0;
  int line = 1;
  int col = 1;
};

// Human-readable token name for diagnostics ("FROM", "an identifier", ...).
std::string token_name(tok k);
std::string describe(const token& t);

// Throws parse_error (errc::syntax_error) on malformed input.
std::vector<token> lex(std::string_view text);

}  // namespace odf::dsl
