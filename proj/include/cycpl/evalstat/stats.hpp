#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cycpl::evalstat {

struct SwResult {
  double w = 0.0;
  double p = 0.0;
};

/// Shapiro-Wilk W and p (Royston's AS R94), 3 <= n <= 5000. Throws
/// DegenerateSample for constant samples or n out of range.
SwResult shapiro_wilk(std::span<const double> sample);

enum class Direction { Greater, Less };
std::string_view to_string(Direction d);

struct TestResult {
  double statistic = 0.0;
  double p = 0.0;
};

/// One-sided paired t on differences; throws DegenerateSample for n < 2 or sd == 0.
TestResult paired_t_one_sided(std::span<const double> d, Direction dir);

/// One-sided Wilcoxon signed-rank (statistic W+). Zeros are dropped before
/// ranking; ties get average ranks. Exact null for n <= 25, otherwise a
/// normal approximation with tie and continuity corrections. Throws
/// AllZeroDifferences.
TestResult wilcoxon_one_sided(std::span<const double> d, Direction dir);

/// Benjamini-Hochberg adjusted p-values in the input order; throws OutOfRange.
std::vector<double> bh_adjust(std::span<const double> p);

enum class TestKind { PairedT, Wilcoxon };
std::string_view to_string(TestKind k);

/// subject id -> endpoint name -> value
using MethodTable = std::map<std::string, std::map<std::string, double>>;

struct StatRow {
  std::string contrast;
  std::string endpoint;
  std::string family;
  TestKind test = TestKind::PairedT;
  Direction direction = Direction::Greater;
  std::size_t n = 0;
  double statistic = 0.0;
  double p_raw = 1.0;
  double p_adj = 1.0;
  double normality_p = 0.0;  // NaN when the normality test was not run
  bool significant = false;
};

/// Endpoint family: the metric stem shared by its 3D and plane-wise variants
/// ("ssim3d", "ssim_axial" -> "ssim").
std::string endpoint_family(std::string_view endpoint);
/// Greater for ssim/psnr, less for error metrics.
Direction endpoint_direction(std::string_view family);

struct CompareOptions {
  double normality_alpha = 0.05;
  double alpha = 0.05;
};

/// Paired comparison of method A against comparator B on every shared
/// endpoint (differences A - B). Normal differences use the paired t-test,
/// others (and degenerate spreads) the Wilcoxon test; BH runs per family.
/// Throws UnpairedSubjects when subjects or endpoints do not match.
std::vector<StatRow> compare_methods(const std::string& contrast, const MethodTable& a,
                                     const MethodTable& b, const CompareOptions& opt = {});

}  // namespace cycpl::evalstat
