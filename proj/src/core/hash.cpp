#include "core/hash.hpp"

#include <openssl/evp.h>

#include "core/errors.hpp"

namespace odf {

object_hash sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != 32)
    raise(errc::io_failure, "sha256 digest failed");
  static const char* hexd = "0123456789abcdef";
  std::string out;
  out.resize(64);
  for (unsigned i = 0; i < 32; ++i) {
    out[2 * i] = hexd[digest[i] >> 4];
    out[2 * i + 1] = hexd[digest[i] & 0xf];
  }
  return out;
}

bool is_object_hash(std::string_view s) {
  if (s.size() != 64) return false;
  for (char c : s)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  return true;
}

}  // namespace odf
