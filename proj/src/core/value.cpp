#include "core/value.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "core/util.hpp"

namespace odf {

namespace {

constexpr int64_t k_ms_per_day = 86400000;

bool all_digits(std::string_view s) {
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return !s.empty();
}

int num(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

// Shared shape check for "YYYY-MM-DDTHH:MM:SS"; returns false on any
// structural problem, fills the six fields otherwise.
bool split_datetime(std::string_view s, int& y, int& mo, int& d, int& h,
                    int& mi, int& sec) {
  if (s.size() != 19) return false;
  if (s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':')
    return false;
  if (!all_digits(s.substr(0, 4)) || !all_digits(s.substr(5, 2)) ||
      !all_digits(s.substr(8, 2)) || !all_digits(s.substr(11, 2)) ||
      !all_digits(s.substr(14, 2)) || !all_digits(s.substr(17, 2)))
    return false;
  y = num(s.substr(0, 4));
  mo = num(s.substr(5, 2));
  d = num(s.substr(8, 2));
  h = num(s.substr(11, 2));
  mi = num(s.substr(14, 2));
  sec = num(s.substr(17, 2));
  return true;
}

std::optional<int64_t> assemble_ms(int y, int mo, int d, int h, int mi, int sec,
                                   int frac_ms) {
  using namespace std::chrono;
  if (y < 1 || y > 9999) return std::nullopt;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                     day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  if (h > 23 || mi > 59 || sec > 59) return std::nullopt;
  int64_t days = sys_days{ymd}.time_since_epoch().count();
  return days * k_ms_per_day + h * 3600000LL + mi * 60000LL + sec * 1000LL +
         frac_ms;
}

}  // namespace

std::string format_timestamp(int64_t ms) {
  if (ms < k_timestamp_min_ms || ms > k_timestamp_max_ms)
    raise(errc::unsupported_value,
          "timestamp out of representable range: " + std::to_string(ms));
  using namespace std::chrono;
  int64_t d = floor_div(ms, k_ms_per_day);
  int64_t rem = ms - d * k_ms_per_day;
  year_month_day ymd{sys_days{days{d}}};
  int hh = static_cast<int>(rem / 3600000);
  rem %= 3600000;
  int mi = static_cast<int>(rem / 60000);
  rem %= 60000;
  int ss = static_cast<int>(rem / 1000);
  int mmm = static_cast<int>(rem % 1000);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), hh, mi, ss, mmm);
  return buf;
}

std::optional<int64_t> parse_timestamp_canonical(std::string_view s) {
  if (s.size() != 24 || s[19] != '.' || s[23] != 'Z') return std::nullopt;
  if (!all_digits(s.substr(20, 3))) return std::nullopt;
  int y, mo, d, h, mi, sec;
  if (!split_datetime(s.substr(0, 19), y, mo, d, h, mi, sec)) return std::nullopt;
  return assemble_ms(y, mo, d, h, mi, sec, num(s.substr(20, 3)));
}

std::optional<int64_t> parse_timestamp_lenient(std::string_view s) {
  if (s.size() < 20 || s.back() != 'Z') return std::nullopt;
  int y, mo, d, h, mi, sec;
  if (!split_datetime(s.substr(0, 19), y, mo, d, h, mi, sec)) return std::nullopt;
  std::string_view frac = s.substr(19, s.size() - 20);
  int frac_ms = 0;
  if (!frac.empty()) {
    if (frac[0] != '.' || frac.size() < 2 || frac.size() > 4) return std::nullopt;
    std::string_view digits = frac.substr(1);
    if (!all_digits(digits)) return std::nullopt;
    frac_ms = num(digits);
    for (size_t i = digits.size(); i < 3; ++i) frac_ms *= 10;
  }
  return assemble_ms(y, mo, d, h, mi, sec, frac_ms);
}

std::string canonical_float_text(double v) {
  if (!std::isfinite(v)) raise(errc::unsupported_value, "non-finite float64");
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

namespace {

void encode_string_body(std::string& out, std::string_view s) {
  static const char* hexd = "0123456789abcdef";
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (c < 0x20) {
          out += "\\u00";
          out += hexd[c >> 4];
          out += hexd[c & 0xf];
        } else {
          out += static_cast<char>(c);
        }
    }
  }
}

void encode_to(const value& v, std::string& out) {
  switch (v.kind()) {
    case value_kind::null: out += "null"; break;
    case value_kind::boolean: out += v.as_bool() ? "true" : "false"; break;
    case value_kind::integer: {
      char buf[24];
      auto res = std::to_chars(buf, buf + sizeof buf, v.as_int());
      out.append(buf, res.ptr);
      break;
    }
    case value_kind::floating: out += canonical_float_text(v.as_float()); break;
    case value_kind::string:
      out += '"';
      encode_string_body(out, v.as_string());
      out += '"';
      break;
    case value_kind::time:
      out += '"';
      out += format_timestamp(v.as_time().ms);
      out += '"';
      break;
    case value_kind::array: {
      out += '[';
      bool first = true;
      for (const auto& e : v.as_array()) {
        if (!first) out += ',';
        first = false;
        encode_to(e, out);
      }
      out += ']';
      break;
    }
    case value_kind::map: {
      out += '{';
      bool first = true;
      for (const auto& [k, e] : v.as_map()) {
        if (!first) out += ',';
        first = false;
        out += '"';
        encode_string_body(out, k);
        out += "\":";
        encode_to(e, out);
      }
      out += '}';
      break;
    }
  }
}

// Strict decoder: exactly the encoder's output grammar. Number canonicality
// is enforced by re-encoding the parsed value and comparing tokens.
struct decoder {
  std::string_view s;
  size_t pos = 0;
  int depth = 0;
  static constexpr int k_max_depth = 192;

  [[noreturn]] void fail(const std::string& what) const {
    raise(errc::decode_error,
          what + " at byte " + std::to_string(pos));
  }

  char peek() const {
    if (pos >= s.size()) raise(errc::decode_error, "unexpected end of input");
    return s[pos];
  }
  char take() {
    char c = peek();
    ++pos;
    return c;
  }
  void expect(char c) {
    if (take() != c) {
      --pos;
      fail(std::string("expected '") + c + "'");
    }
  }

  std::string parse_string_body() {
    expect('"');
    std::string out;
    for (;;) {
      unsigned char c = static_cast<unsigned char>(take());
      if (c == '"') return out;
      if (c == '\\') {
        char e = take();
        switch (e) {
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          case 'b': out += '\b'; break;
          case 'f': out += '\f'; break;
          case 'n': out += '\n'; break;
          case 'r': out += '\r'; break;
          case 't': out += '\t'; break;
          case 'u': {
            if (pos + 4 > s.size()) fail("truncated \\u escape");
            if (s[pos] != '0' || s[pos + 1] != '0') fail("non-canonical \\u escape");
            auto hex = [&](char h) -> int {
              if (h >= '0' && h <= '9') return h - '0';
              if (h >= 'a' && h <= 'f') return h - 'a' + 10;
              fail("non-canonical \\u escape");
            };
            int b = hex(s[pos + 2]) * 16 + hex(s[pos + 3]);
            pos += 4;
            if (b >= 0x20) fail("non-canonical \\u escape");
            if (b == '\b' || b == '\f' || b == '\n' || b == '\r' || b == '\t')
              fail("control byte must use its named escape");
            out += static_cast<char>(b);
            break;
          }
          default: fail("unknown escape");
        }
      } else if (c < 0x20) {
        fail("raw control byte in string");
      } else {
        out += static_cast<char>(c);
      }
    }
  }

  value parse_number() {
    size_t start = pos;
    if (peek() == '-') ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    bool fractional = false;
    if (pos < s.size() && s[pos] == '.') {
      fractional = true;
      ++pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    }
    if (pos < s.size() && (s[pos] == 'e' || s[pos] == 'E')) {
      fractional = true;
      ++pos;
      if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) ++pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    }
    std::string_view tok = s.substr(start, pos - start);
    if (fractional) {
      double d = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
      if (ec != std::errc() || p != tok.data() + tok.size())
        fail("malformed float token");
      if (canonical_float_text(d) != tok) fail("non-canonical float token");
      return value::floating(d);
    }
    int64_t i = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), i);
    if (ec != std::errc() || p != tok.data() + tok.size())
      fail("malformed int token");
    char buf[24];
    auto res = std::to_chars(buf, buf + sizeof buf, i);
    if (std::string_view(buf, res.ptr - buf) != tok)
      fail("non-canonical int token");
    return value::integer(i);
  }

  value parse_value() {
    if (++depth > k_max_depth) fail("nesting too deep");
    value out = [&] {
      char c = peek();
      switch (c) {
        case 'n':
          if (s.substr(pos, 4) != "null") fail("bad literal");
          pos += 4;
          return value::null();
        case 't':
          if (s.substr(pos, 4) != "true") fail("bad literal");
          pos += 4;
          return value::boolean(true);
        case 'f':
          if (s.substr(pos, 5) != "false") fail("bad literal");
          pos += 5;
          return value::boolean(false);
        case '"': return value::string(parse_string_body());
        case '[': {
          ++pos;
          value::array_t items;
          if (peek() == ']') {
            ++pos;
            return value::array(std::move(items));
          }
          for (;;) {
            items.push_back(parse_value());
            char d = take();
            if (d == ']') break;
            if (d != ',') {
              --pos;
              fail("expected ',' or ']'");
            }
          }
          return value::array(std::move(items));
        }
        case '{': {
          ++pos;
          value::map_t m;
          if (peek() == '}') {
            ++pos;
            return value::map(std::move(m));
          }
          std::string prev;
          bool first = true;
          for (;;) {
            std::string key = parse_string_body();
            if (!first && key <= prev) fail("map keys not strictly ascending");
            expect(':');
            m.emplace(key, parse_value());
            prev = std::move(key);
            first = false;
            char d = take();
            if (d == '}') break;
            if (d != ',') {
              --pos;
              fail("expected ',' or '}'");
            }
          }
          return value::map(std::move(m));
        }
        default:
          if (c == '-' || (c >= '0' && c <= '9')) return parse_number();
          fail("unexpected byte");
      }
    }();
    --depth;
    return out;
  }
};

}  // namespace

std::string canonical_encode(const value& v) {
  std::string out;
  encode_to(v, out);
  return out;
}

value canonical_decode(std::string_view bytes) {
  decoder d{bytes};
  value v = d.parse_value();
  if (d.pos != bytes.size())
    raise(errc::decode_error,
          "trailing bytes after value at byte " + std::to_string(d.pos));
  return v;
}

}  // namespace odf
