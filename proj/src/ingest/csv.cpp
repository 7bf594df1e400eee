#include "ingest/csv.hpp"

#include "core/errors.hpp"

namespace odf {

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  size_t row_no = 1;  // 1-based, counts logical records
  bool in_quotes = false;
  bool cell_was_quoted = false;
  bool at_cell_start = true;

  auto fail = [&](const std::string& what) {
    raise(errc::parse_failure,
          "csv row " + std::to_string(row_no) + ": " + what);
  };
  auto end_cell = [&] {
    row.push_back(std::move(cell));
    cell.clear();
    at_cell_start = true;
    cell_was_quoted = false;
  };
  auto end_row = [&] {
    end_cell();
    rows.push_back(std::move(row));
    row.clear();
    ++row_no;
  };

  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < n && text[i + 1] == '"') {
          cell += '"';
          i += 2;
        } else {
          in_quotes = false;
          ++i;
        }
      } else {
        cell += c;
        ++i;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!at_cell_start) fail("quote inside unquoted cell");
        if (cell_was_quoted) fail("data after closing quote");
        in_quotes = true;
        cell_was_quoted = true;
        at_cell_start = false;
        ++i;
        break;
      case ',':
        end_cell();
        ++i;
        break;
      case '\r':
        if (i + 1 >= n || text[i + 1] != '\n') fail("bare carriage return");
        end_row();
        i += 2;
        break;
      case '\n':
        end_row();
        ++i;
        break;
      default:
        if (cell_was_quoted) fail("data after closing quote");
        cell += c;
        at_cell_start = false;
        ++i;
        break;
    }
  }
  if (in_quotes) fail("unterminated quote");
  // final record without trailing newline
  if (!at_cell_start || !row.empty() || cell_was_quoted) end_row();
  return rows;
}

}  // namespace odf
