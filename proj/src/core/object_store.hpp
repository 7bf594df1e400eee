#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "core/hash.hpp"

namespace odf {

// Content-addressed, write-once object directory. Objects live at
// <root>/<first 2 hex>/<remaining 62 hex>; writes go through a temp file +
// rename so readers never observe partial objects.
class object_store {
 public:
  explicit object_store(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path_for(const object_hash& h) const;

  // Idempotent: re-putting identical bytes is a no-op.
  object_hash put(std::string_view bytes);

  // Adopt bytes that a peer claims hash to `h` (sync); object_corrupt on lie.
  void put_expected(const object_hash& h, std::string_view bytes);

  bool has(const object_hash& h) const;

  // Verifies stored bytes still hash to the name; object_corrupt otherwise,
  // object_not_found when absent.
  std::string get(const object_hash& h) const;

 private:
  std::filesystem::path root_;
};

}  // namespace odf
