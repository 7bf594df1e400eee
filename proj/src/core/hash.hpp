#pragma once

#include <string>
#include <string_view>

namespace odf {

// 64 lowercase hex chars (SHA-256).
using object_hash = std::string;

inline constexpr char k_null_hash[] =
    "0000000000000000000000000000000000000000000000000000000000000000";

object_hash sha256_hex(std::string_view bytes);
bool is_object_hash(std::string_view s);

}  // namespace odf
