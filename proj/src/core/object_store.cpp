#include "core/object_store.hpp"

#include "core/errors.hpp"
#include "core/util.hpp"

namespace odf {

std::filesystem::path object_store::path_for(const object_hash& h) const {
  if (!is_object_hash(h)) raise(errc::object_not_found, "malformed hash: " + h);
  return root_ / h.substr(0, 2) / h.substr(2);
}

object_hash object_store::put(std::string_view bytes) {
  object_hash h = sha256_hex(bytes);
  auto p = path_for(h);
  if (!std::filesystem::exists(p)) write_file_atomic(p, bytes);
  return h;
}

void object_store::put_expected(const object_hash& h, std::string_view bytes) {
  if (sha256_hex(bytes) != h)
    raise(errc::object_corrupt, "bytes do not hash to " + h);
  auto p = path_for(h);
  if (!std::filesystem::exists(p)) write_file_atomic(p, bytes);
}

bool object_store::has(const object_hash& h) const {
  return std::filesystem::exists(path_for(h));
}

std::string object_store::get(const object_hash& h) const {
  auto bytes = read_file(path_for(h));
  if (!bytes) raise(errc::object_not_found, h);
  if (sha256_hex(*bytes) != h)
    raise(errc::object_corrupt, "stored bytes do not hash to " + h);
  return std::move(*bytes);
}

}  // namespace odf
