#include "cycpl/evalstat/report_io.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "cycpl/error.hpp"

namespace cycpl::evalstat {

namespace {

nlohmann::ordered_json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

}  // namespace

CsvTable metrics_table(const MetricsReport& r) {
  CsvTable t;
  t.header.push_back("subject");
  for (const auto& n : metric_names()) t.header.push_back(n);
  for (const auto& s : r.subjects) {
    std::vector<std::string> row{s.id};
    for (const auto& [name, v] : s.flatten()) row.push_back(format_number(v));
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable summary_table(const MetricsReport& r) {
  CsvTable t;
  t.header = {"metric", "mean", "sd"};
  for (const auto& [name, a] : r.summary) t.rows.push_back({name, format_number(a.mean), format_number(a.sd)});
  return t;
}

std::string metrics_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["subjects"] = nlohmann::ordered_json::array();
  for (const auto& s : r.subjects) {
    nlohmann::ordered_json o;
    o["id"] = s.id;
    for (const auto& [name, v] : s.flatten()) o[name] = json_number(v);
    j["subjects"].push_back(std::move(o));
  }
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  for (const auto& [name, a] : r.summary)
    summary[name] = {{"mean", json_number(a.mean)}, {"sd", json_number(a.sd)}};
  j["summary"] = std::move(summary);
  return j.dump(2) + "\n";
}

void write_metrics_report(const MetricsReport& r, const std::filesystem::path& dir,
                          const std::string& stem) {
  std::filesystem::create_directories(dir);
  write_csv(metrics_table(r), dir / (stem + ".csv"));
  write_csv(summary_table(r), dir / (stem + "_summary.csv"));
  std::ofstream out(dir / (stem + ".json"), std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot write " + (dir / (stem + ".json")).string());
  out << metrics_json(r);
  if (!out) fail(ErrorCode::Io, "short write to " + (dir / (stem + ".json")).string());
}

MethodTable method_table(const CsvTable& t) {
  const std::size_t id_col = t.column("subject");
  MethodTable out;
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) fail(ErrorCode::ParseError, "metrics row has the wrong column count");
    auto& vals = out[row[id_col]];
    if (!vals.empty()) fail(ErrorCode::DuplicateName, "subject " + row[id_col] + " appears twice");
    for (std::size_t c = 0; c < row.size(); ++c)
      if (c != id_col) vals[t.header[c]] = parse_number(row[c]);
  }
  if (out.empty()) fail(ErrorCode::ParseError, "metrics table has no subjects");
  return out;
}

MethodTable read_method_table(const std::filesystem::path& path) {
  try {
    return method_table(read_csv(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

CsvTable roi_csv(const RoiTable& t) {
  CsvTable c;
  c.header = {"roi", "subject", "mu_truth", "mu_generated", "mse_roi"};
  for (const auto& r : t.rows)
    for (std::size_t i = 0; i < r.subjects.size(); ++i)
      c.rows.push_back({std::to_string(r.roi), r.subjects[i], format_number(r.truth[i]),
                        format_number(r.generated[i]), format_number(r.mse)});
  return c;
}

CsvTable stat_csv(std::span<const StatRow> rows) {
  CsvTable c;
  c.header = {"contrast", "endpoint", "family", "test", "direction", "n",
              "statistic", "p_raw", "p_adj", "normality_p", "significant"};
  for (const auto& r : rows)
    c.rows.push_back({r.contrast, r.endpoint, r.family, std::string(to_string(r.test)),
                      std::string(to_string(r.direction)), std::to_string(r.n),
                      format_number(r.statistic), format_number(r.p_raw), format_number(r.p_adj),
                      format_number(r.normality_p), r.significant ? "true" : "false"});
  return c;
}

}  // namespace cycpl::evalstat
