#pragma once

#include <string_view>
#include <vector>

#include "core/events.hpp"

namespace odf {

// Decodes raw source bytes into typed rows, one map per record holding
// exactly the schema's columns with explicit nulls. Strict on both sides:
// csv needs a header that matches the schema column order, ndjson objects
// must carry every column and nothing else. Errors cite the 1-based data
// row. An optional UTF-8 byte-order mark is tolerated.
std::vector<value::map_t> parse_source(std::string_view bytes,
                                       const polling_source& src);

}  // namespace odf
