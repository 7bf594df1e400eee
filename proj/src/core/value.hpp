#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "core/errors.hpp"

namespace odf {

// Millisecond-precision UTC instant. Canonical text form is
// YYYY-MM-DDTHH:MM:SS.mmmZ; representable years are 0001..9999.
struct timestamp {
  int64_t ms = 0;
  auto operator<=>(const timestamp&) const = default;
};

inline constexpr int64_t k_timestamp_min_ms = -62135596800000;  // 0001-01-01T00:00:00.000Z
inline constexpr int64_t k_timestamp_max_ms = 253402300799999;  // 9999-12-31T23:59:59.999Z

// ms -> canonical text. Throws unsupported_value outside the representable range.
std::string format_timestamp(int64_t ms);
// Canonical text only (exact shape, calendar-valid); nullopt otherwise.
std::optional<int64_t> parse_timestamp_canonical(std::string_view s);
// Source/CLI form: fraction optional with 1..3 digits, otherwise as canonical.
std::optional<int64_t> parse_timestamp_lenient(std::string_view s);

enum class value_kind { null, boolean, integer, floating, string, time, array, map };

// One in-memory value per canonical byte form. Strings whose bytes match the
// canonical timestamp shape are normalized into timestamps at construction so
// decode(encode(v)) == v holds with no side channel.
class value {
 public:
  using array_t = std::vector<value>;
  using map_t = std::map<std::string, value>;  // key byte order == canonical order

  value() : v_(std::monostate{}) {}

  static value null() { return value(); }
  static value boolean(bool b) { return value(repr(b)); }
  static value integer(int64_t i) { return value(repr(i)); }
  static value floating(double d) { return value(repr(d)); }
  static value time(timestamp t) { return value(repr(t)); }
  static value time_ms(int64_t ms) { return value(repr(timestamp{ms})); }
  static value string(std::string s) {
    if (auto ms = parse_timestamp_canonical(s)) return time_ms(*ms);
    return value(repr(std::move(s)));
  }
  static value array(array_t a) { return value(repr(std::move(a))); }
  static value map(map_t m) { return value(repr(std::move(m))); }

  value_kind kind() const { return static_cast<value_kind>(v_.index()); }
  bool is_null() const { return kind() == value_kind::null; }

  bool as_bool() const { return std::get<bool>(v_); }
  int64_t as_int() const { return std::get<int64_t>(v_); }
  double as_float() const { return std::get<double>(v_); }
  const std::string& as_string() const { return std::get<std::string>(v_); }
  timestamp as_time() const { return std::get<timestamp>(v_); }
  const array_t& as_array() const { return std::get<array_t>(v_); }
  const map_t& as_map() const { return std::get<map_t>(v_); }
  array_t& as_array() { return std::get<array_t>(v_); }
  map_t& as_map() { return std::get<map_t>(v_); }

  bool operator==(const value& o) const = default;

 private:
  using repr = std::variant<std::monostate, bool, int64_t, double, std::string,
                            timestamp, array_t, map_t>;
  explicit value(repr v) : v_(std::move(v)) {}
  repr v_;
};

// Canonical byte encoding: sorted map keys, minimal string escapes, base-10
// int64, shortest round-trip float64 (".0" appended when integral so numbers
// stay typed), timestamps as canonical text. Rejects NaN/inf and timestamps
// out of range with unsupported_value.
std::string canonical_encode(const value& v);

// Strict inverse: accepts exactly the bytes canonical_encode produces, so a
// successful decode is a format-conformance proof. Throws decode_error.
value canonical_decode(std::string_view bytes);

// Shortest round-trip float text, ".0" suffixed when there is no '.' or
// exponent. Shared by the encoder and the decoder's canonicality check.
std::string canonical_float_text(double d);

}  // namespace odf
