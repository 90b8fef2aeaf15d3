#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "cycpl/csv.hpp"
#include "cycpl/evalstat/metrics.hpp"
#include "cycpl/evalstat/roi.hpp"
#include "cycpl/evalstat/stats.hpp"

namespace cycpl::evalstat {

/// One row per subject: "subject" then metric_names().
CsvTable metrics_table(const MetricsReport& r);
/// Columns metric, mean, sd.
CsvTable summary_table(const MetricsReport& r);
/// {"subjects": [{"id": ..., "<metric>": value}], "summary": {"<metric>": {"mean", "sd"}}};
/// non-finite values are written as the strings "inf", "-inf" or "nan".
std::string metrics_json(const MetricsReport& r);

/// Writes <stem>.csv, <stem>_summary.csv and <stem>.json into dir.
void write_metrics_report(const MetricsReport& r, const std::filesystem::path& dir,
                          const std::string& stem = "metrics");

/// Parses a per-subject metrics CSV into subject -> endpoint -> value.
/// Throws ParseError, DuplicateName or MissingField.
MethodTable method_table(const CsvTable& t);
MethodTable read_method_table(const std::filesystem::path& path);

/// Long format: roi, subject, mu_truth, mu_generated, mse_roi.
CsvTable roi_csv(const RoiTable& t);

/// Columns contrast, endpoint, family, test, direction, n, statistic, p_raw,
/// p_adj, normality_p, significant.
CsvTable stat_csv(std::span<const StatRow> rows);

}  // namespace cycpl::evalstat
