#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace cycpl {

/// Shortest decimal that round-trips; "inf", "-inf" and "nan" otherwise.
std::string format_number(double v);
double parse_number(const std::string& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws MissingField.
  std::size_t column(const std::string& name) const;
};

std::string to_csv(const CsvTable& t);
CsvTable parse_csv(const std::string& text);
void write_csv(const CsvTable& t, const std::filesystem::path& path);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace cycpl
