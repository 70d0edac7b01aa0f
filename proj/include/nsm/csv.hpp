#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace nsm {

// Shortest decimal form that parses back to the same double.
std::string format_number(double x);
double parse_number(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
  double number(std::size_t row, std::size_t col) const;
};

CsvTable read_csv(std::istream& is);
void write_csv(std::ostream& os, const CsvTable& table);

CsvTable read_csv_file(const std::filesystem::path& path);

// Writes through a temporary file and renames it into place.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace nsm
