#include <sstream>

#include "geolm/common/error.hpp"
#include "geolm/doc/normalize.hpp"
#include "text_util.hpp"

namespace geolm::doc {

namespace {

// A cell that reads "---" (after any leading backslashes) would parse as the
// header separator, so it gains one extra leading backslash.
bool looks_like_separator(std::string_view cell) {
  const auto first = cell.find_first_not_of('\\');
  return first != std::string_view::npos && cell.substr(first) == "---";
}

std::string escape_cell(std::string_view cell) {
  std::string out;
  out.reserve(cell.size() + 1);
  if (looks_like_separator(cell)) out.push_back('\\');
  for (char c : cell) {
    if (c == '|') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

void append_row(std::string& out, const std::vector<std::string>& cells) {
  out += '|';
  for (const auto& c : cells) {
    out += ' ';
    out += c;
    out += " |";
  }
  out += '\n';
}

// Splits "| a | b\|c |" into {"a", "b|c"}.
std::vector<std::string> split_row(std::string_view line) {
  if (line.size() < 2 || line.front() != '|' || line.back() != '|') {
    throw Error(ErrorCode::kFormat, "table row must start and end with '|'");
  }
  std::vector<std::string> cells;
  std::string cur;
  for (std::size_t i = 1; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '\\' && i + 1 < line.size() && line[i + 1] == '|') {
      cur.push_back('|');
      ++i;
    } else if (c == '|') {
      if (cur.size() < 2 || cur.front() != ' ' || cur.back() != ' ') {
        throw Error(ErrorCode::kFormat, "table cell missing padding");
      }
      cells.push_back(cur.substr(1, cur.size() - 2));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return cells;
}

bool is_separator(const std::vector<std::string>& cells) {
  if (cells.empty()) return false;
  for (const auto& c : cells) {
    if (c != "---") return false;
  }
  return true;
}

}  // namespace

std::string render_table(const Table& t) {
  if (t.cells.empty() || t.cells.front().empty()) return {};
  const std::size_t cols = t.cells.front().size();
  for (std::size_t r = 0; r < t.cells.size(); ++r) {
    if (t.cells[r].size() != cols) {
      throw Error(ErrorCode::kMalformedBlock, "ragged table: row " + std::to_string(r) + " has " +
                                                  std::to_string(t.cells[r].size()) + " cells, expected " +
                                                  std::to_string(cols));
    }
  }
  if (t.header_rows > t.cells.size()) {
    throw Error(ErrorCode::kMalformedBlock, "header_rows exceeds row count");
  }

  std::string out(start_marker(MarkerKind::kTable));
  out += '\n';
  for (std::size_t r = 0; r < t.cells.size(); ++r) {
    std::vector<std::string> row;
    row.reserve(cols);
    for (const auto& cell : t.cells[r]) {
      row.push_back(escape_cell(collapse_whitespace(sanitize_text(cell), /*keep_newlines=*/false)));
    }
    append_row(out, row);
    if (t.header_rows > 0 && r + 1 == t.header_rows) {
      append_row(out, std::vector<std::string>(cols, "---"));
    }
  }
  out += end_marker(MarkerKind::kTable);
  return out;
}

ParsedTable parse_markdown_table(std::string_view rendered) {
  const auto open = start_marker(MarkerKind::kTable);
  const auto close = end_marker(MarkerKind::kTable);
  if (rendered.substr(0, open.size()) != open || rendered.size() < open.size() + close.size() ||
      rendered.substr(rendered.size() - close.size()) != close) {
    throw Error(ErrorCode::kFormat, "table text is not wrapped in table markers");
  }
  std::string body(rendered.substr(open.size(), rendered.size() - open.size() - close.size()));
  ParsedTable table;
  std::istringstream in(body);
  std::string line;
  bool seen_separator = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_row(line);
    if (!seen_separator && is_separator(cells)) {
      table.header_rows = table.cells.size();
      seen_separator = true;
      continue;
    }
    for (auto& cell : cells) {
      if (looks_like_separator(cell) && cell.front() == '\\') cell.erase(0, 1);
    }
    table.cells.push_back(std::move(cells));
  }
  return table;
}

}  // namespace geolm::doc
