#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace odf {

// RFC 4180 rows: quoted cells may contain commas, quotes ("") and newlines.
// Accepts LF or CRLF endings and a missing final newline. Cell text is
// returned verbatim (no type interpretation). Throws parse_failure with a
// 1-based row number on stray or unterminated quotes.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

}  // namespace odf
