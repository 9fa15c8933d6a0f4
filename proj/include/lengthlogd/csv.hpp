#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lengthlogd {

/// Header row plus data rows, all cells as raw text.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;  // 1-based source line of each row
};

/// RFC 4180 reader: quoted fields, doubled quotes, CRLF or LF line ends.
/// A UTF-8 byte-order mark is skipped. Blank lines are ignored. Throws
/// DataError on an unterminated quote or a row whose width differs from
/// the header.
CsvTable parse_csv(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Quotes a field only when it contains a comma, quote or line break.
std::string csv_escape(std::string_view field);
std::string csv_line(const std::vector<std::string>& fields);

/// Shortest text that parses back to exactly the same double.
std::string format_double(double v);

/// Strict numeric parse of a whole (whitespace-trimmed) cell. Returns false
/// for empty cells, trailing garbage, and non-finite values.
bool parse_double(std::string_view text, double& out);

std::string_view trim(std::string_view s);

}  // namespace lengthlogd
