#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace odf {

// Floor division (quotient rounded toward negative infinity).
constexpr int64_t floor_div(int64_t a, int64_t b) {
  int64_t q = a / b;
  int64_t r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

constexpr int64_t floor_mod(int64_t a, int64_t b) { return a - floor_div(a, b) * b; }

bool checked_add(int64_t a, int64_t b, int64_t& out);
bool checked_sub(int64_t a, int64_t b, int64_t& out);
bool checked_mul(int64_t a, int64_t b, int64_t& out);

// Whole file as bytes; nullopt when the file does not exist, io_failure on
// other errors.
std::optional<std::string> read_file(const std::filesystem::path& p);
std::string read_file_or_throw(const std::filesystem::path& p);

// Write via temp file + rename in the same directory. Creates parents.
void write_file_atomic(const std::filesystem::path& p, std::string_view bytes);

}  // namespace odf
