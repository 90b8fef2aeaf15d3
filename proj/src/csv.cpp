#include "cycpl/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cycpl/error.hpp"

namespace cycpl {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_number(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    fail(ErrorCode::ParseError, "not a number: '" + s + "'");
  return v;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  fail(ErrorCode::MissingField, "CSV has no column '" + name + "'");
}

namespace {

std::string quote(const std::string& f) {
  if (f.find_first_of(",\"\n\r") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void put_row(std::ostringstream& os, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << quote(row[i]);
  os << "\n";
}

}  // namespace

std::string to_csv(const CsvTable& t) {
  std::ostringstream os;
  put_row(os, t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) fail(ErrorCode::ShapeMismatch, "CSV row width differs from header");
    put_row(os, r);
  }
  return os.str();
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) fail(ErrorCode::ParseError, "unterminated quoted CSV field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::ParseError, "CSV has no header row");
  CsvTable t;
  t.header = std::move(rows.front());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != t.header.size())
      fail(ErrorCode::ParseError, "CSV row " + std::to_string(i + 1) + " has " +
                                      std::to_string(rows[i].size()) + " fields, expected " +
                                      std::to_string(t.header.size()));
    t.rows.push_back(std::move(rows[i]));
  }
  return t;
}

void write_csv(const CsvTable& t, const std::filesystem::path& path) {
  const std::string text = to_csv(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

}  // namespace cycpl
