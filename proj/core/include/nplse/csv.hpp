#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nplse {

/// Shortest text that round-trips the double exactly.
std::string format_double(double v);

/// Comma-separated table with '#'-prefixed comment lines before the header.
struct CsvTable {
  std::vector<std::string> comments;  ///< without the leading '#'
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws std::out_of_range naming it.
  int column(const std::string& name) const;
  double number(std::size_t row, int col) const;
  double number(std::size_t row, const std::string& name) const { return number(row, column(name)); }
};

/// Parses the whole stream. Lines starting with '#' before the header are
/// comments; '#' lines after the first data row are also collected as
/// comments (footer blocks). Throws std::runtime_error with the line number
/// on ragged rows.
CsvTable read_csv(std::istream& is);
void write_csv(std::ostream& os, const CsvTable& table);

std::vector<std::string> split(const std::string& line, char sep);

}  // namespace nplse
