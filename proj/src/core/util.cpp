#include "core/util.hpp"

#include <atomic>
#include <fstream>
#include <random>
#include <system_error>

#include "core/errors.hpp"

namespace odf {

bool checked_add(int64_t a, int64_t b, int64_t& out) {
  return !__builtin_add_overflow(a, b, &out);
}

bool checked_sub(int64_t a, int64_t b, int64_t& out) {
  return !__builtin_sub_overflow(a, b, &out);
}

bool checked_mul(int64_t a, int64_t b, int64_t& out) {
  return !__builtin_mul_overflow(a, b, &out);
}

std::optional<std::string> read_file(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f.is_open()) {
    std::error_code ec;
    if (!std::filesystem::exists(p, ec)) return std::nullopt;
    raise(errc::io_failure, "cannot open " + p.string());
  }
  std::string out;
  f.seekg(0, std::ios::end);
  auto n = f.tellg();
  if (n < 0) raise(errc::io_failure, "cannot stat " + p.string());
  out.resize(static_cast<size_t>(n));
  f.seekg(0);
  f.read(out.data(), n);
  if (!f.good() && !f.eof()) raise(errc::io_failure, "cannot read " + p.string());
  return out;
}

std::string read_file_or_throw(const std::filesystem::path& p) {
  auto r = read_file(p);
  if (!r) raise(errc::io_failure, "no such file: " + p.string());
  return std::move(*r);
}

void write_file_atomic(const std::filesystem::path& p, std::string_view bytes) {
  static std::atomic<uint64_t> counter{0};
  std::error_code ec;
  if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path(), ec);
    if (ec) raise(errc::io_failure, "cannot create " + p.parent_path().string());
  }
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  auto tmp = p.parent_path() /
             (".tmp." + std::to_string(rng()) + "." +
              std::to_string(counter.fetch_add(1)) + "." + p.filename().string());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f.is_open()) raise(errc::io_failure, "cannot create " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f.good()) {
      f.close();
      std::filesystem::remove(tmp, ec);
      raise(errc::io_failure, "cannot write " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, p, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    raise(errc::io_failure, "cannot move into place: " + p.string());
  }
}

}  // namespace odf
