#pragma once
#include <string>
#include <vector>

namespace evc {

// Strict numeric CSV: comma-separated, '.' decimal, one header row, LF line
// endings, every data row the same arity as the header, every cell numeric.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  // column index by header name; throws naming the column if absent
  int col(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
};

// Parse errors name the 1-based row and column of the offending cell.
Table read_csv(const std::string& path);
Table parse_csv(const std::string& text, const std::string& origin);

// Writes to <path>.tmp then renames, so a reader never sees a torn file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// Fixed-notation-or-scientific shortest form (%.10g): stable across runs,
// enough digits to round-trip the quantities emitted here.
std::string format_double(double v);

}  // namespace evc
