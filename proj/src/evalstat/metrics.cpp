#include "cycpl/evalstat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cycpl/error.hpp"

namespace cycpl::evalstat {

namespace {

void check_same(const VolumeGrid& a, const VolumeGrid& b) {
  if (!(a.dims() == b.dims())) fail(ErrorCode::ShapeMismatch, "generated and truth volumes differ in size");
}

double mse_of(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

double mae_of(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(static_cast<double>(a[i]) - b[i]);
  return acc / static_cast<double>(a.size());
}

double psnr_of(double peak, double mse) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

/// Valid positions of a 1D Gaussian filter along one axis of a rows x cols grid.
std::vector<double> filter_rows(const std::vector<double>& x, std::size_t rows, std::size_t cols,
                                const std::vector<double>& g) {
  const std::size_t oc = cols - g.size() + 1;
  std::vector<double> out(rows * oc, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < oc; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) acc += g[k] * x[r * cols + c + k];
      out[r * oc + c] = acc;
    }
  return out;
}

std::vector<double> filter_cols(const std::vector<double>& x, std::size_t rows, std::size_t cols,
                                const std::vector<double>& g) {
  const std::size_t orow = rows - g.size() + 1;
  std::vector<double> out(orow * cols, 0.0);
  for (std::size_t r = 0; r < orow; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < g.size(); ++k) acc += g[k] * x[(r + k) * cols + c];
      out[r * cols + c] = acc;
    }
  return out;
}

}  // namespace

double psnr(const VolumeGrid& yhat, const VolumeGrid& y) {
  check_same(yhat, y);
  return psnr_of(y.max(), mse_of(yhat.data(), y.data()));
}

double mae(const VolumeGrid& yhat, const VolumeGrid& y) {
  check_same(yhat, y);
  return mae_of(yhat.data(), y.data());
}

double nmae(const VolumeGrid& yhat, const VolumeGrid& y) {
  check_same(yhat, y);
  const double range = static_cast<double>(y.max()) - y.min();
  if (!(range > 0.0)) fail(ErrorCode::DegenerateRange, "NMAE needs a non-constant truth volume");
  return mae_of(yhat.data(), y.data()) / range;
}

double ssim_2d(const Slice2D& a, const Slice2D& b, double data_range, const losses::SsimConfig& cfg) {
  if (a.rows != b.rows || a.cols != b.cols) fail(ErrorCode::ShapeMismatch, "slices differ in size");
  cfg.validate();
  const std::size_t win = cfg.effective_window(std::min(a.rows, a.cols));
  const auto g = losses::gaussian_window(win, cfg.sigma);
  const std::size_t n = a.rows * a.cols;
  std::vector<double> maps[5];
  for (auto& m : maps) m.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.data[i], y = b.data[i];
    maps[0][i] = x;
    maps[1][i] = y;
    maps[2][i] = x * x;
    maps[3][i] = y * y;
    maps[4][i] = x * y;
  }
  const std::size_t oc = a.cols - win + 1;
  for (auto& m : maps) m = filter_cols(filter_rows(m, a.rows, a.cols, g), a.rows, oc, g);
  const double c1 = (cfg.k1 * data_range) * (cfg.k1 * data_range);
  const double c2 = (cfg.k2 * data_range) * (cfg.k2 * data_range);
  double total = 0.0;
  for (std::size_t i = 0; i < maps[0].size(); ++i) {
    const double mx = maps[0][i], my = maps[1][i];
    const double vx = maps[2][i] - mx * mx, vy = maps[3][i] - my * my, cxy = maps[4][i] - mx * my;
    total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(maps[0].size());
}

std::vector<std::pair<std::string, double>> SubjectMetrics::flatten() const {
  std::vector<std::pair<std::string, double>> out{
      {"ssim3d", ssim3d}, {"psnr3d", psnr3d}, {"mae3d", mae3d}, {"nmae3d", nmae3d}};
  for (Plane p : kAllPlanes) {
    const std::string s(to_string(p));
    const auto& m = plane[static_cast<std::size_t>(p)];
    out.emplace_back("ssim_" + s, m.ssim);
    out.emplace_back("psnr_" + s, m.psnr);
    out.emplace_back("mae_" + s, m.mae);
    out.emplace_back("nmae_" + s, m.nmae);
  }
  return out;
}

std::vector<std::string> metric_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : SubjectMetrics{}.flatten()) names.push_back(k);
  return names;
}

SubjectMetrics subject_metrics(const EvalPair& pair, const losses::SsimConfig& cfg) {
  const VolumeGrid& g = pair.generated;
  const VolumeGrid& t = pair.truth;
  check_same(g, t);
  SubjectMetrics s;
  s.id = pair.id;
  s.ssim3d = losses::ssim_value(g, t, cfg);
  s.psnr3d = psnr(g, t);
  s.mae3d = mae(g, t);
  s.nmae3d = nmae(g, t);

  // Plane-wise metrics take their data range and peak from the whole truth volume.
  double range = static_cast<double>(t.max()) - t.min();
  const double ssim_range = cfg.range_mode == losses::RangeMode::Fixed ? cfg.fixed_range
                            : (range > 0.0 ? range : 1.0);
  for (Plane p : kAllPlanes) {
    const auto [lo, hi] = scaled_slice_range(t.dims().extent(p));
    PlaneMetrics acc;
    for (std::size_t i = lo; i <= hi; ++i) {
      const Slice2D a = extract_slice(g, p, i), b = extract_slice(t, p, i);
      acc.ssim += ssim_2d(a, b, ssim_range, cfg);
      acc.psnr += psnr_of(t.max(), mse_of(a.data, b.data));
      const double m = mae_of(a.data, b.data);
      acc.mae += m;
      acc.nmae += m / range;
    }
    const double k = static_cast<double>(hi - lo + 1);
    s.plane[static_cast<std::size_t>(p)] = {acc.ssim / k, acc.psnr / k, acc.mae / k, acc.nmae / k};
  }
  return s;
}

Aggregate aggregate(std::span<const double> v) {
  Aggregate a;
  if (v.empty()) return a;
  double total = 0.0;
  for (double x : v) total += x;
  a.mean = total / static_cast<double>(v.size());
  if (v.size() > 1 && std::isfinite(a.mean)) {
    double ss = 0.0;
    for (double x : v) ss += (x - a.mean) * (x - a.mean);
    a.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return a;
}

MetricsReport metrics_report(std::span<const EvalPair> pairs, const losses::SsimConfig& cfg) {
  if (pairs.empty()) fail(ErrorCode::Config, "metrics report needs at least one pair");
  MetricsReport r;
  for (const auto& p : pairs) r.subjects.push_back(subject_metrics(p, cfg));
  const auto names = metric_names();
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<double> col;
    for (const auto& s : r.subjects) col.push_back(s.flatten()[k].second);
    r.summary.emplace_back(names[k], aggregate(col));
  }
  return r;
}

}  // namespace cycpl::evalstat
