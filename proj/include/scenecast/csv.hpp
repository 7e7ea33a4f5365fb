#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace scenecast {

/// A CSV file held in memory. Lines starting with '#' are treated as comments.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  /// Physical line number (1-based) of each row, for error messages.
  std::vector<std::size_t> line_numbers;

  /// Index of a named column; throws ParseError if absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

CsvTable read_csv(std::istream& in, const std::string& source_name);
CsvTable read_csv(const std::filesystem::path& path);

/// Splits one CSV record. Supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_field(std::string_view value);

/// Shortest round-trippable decimal rendering of a double.
std::string format_double(double v);

double parse_double(std::string_view text, std::string_view context);
int parse_int(std::string_view text, std::string_view context);

std::string trim(std::string_view s);

}  // namespace scenecast
