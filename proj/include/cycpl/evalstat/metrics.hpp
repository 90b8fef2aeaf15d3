#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cycpl/losses.hpp"
#include "cycpl/volgrid.hpp"

namespace cycpl::evalstat {

/// 10 log10(R^2 / MSE) with R = max(y); +inf when the volumes are identical.
double psnr(const VolumeGrid& yhat, const VolumeGrid& y);
double mae(const VolumeGrid& yhat, const VolumeGrid& y);
/// MAE / (max(y) - min(y)); throws DegenerateRange for constant y.
double nmae(const VolumeGrid& yhat, const VolumeGrid& y);

/// Valid-window Gaussian SSIM of two equally sized slices with a given data
/// range (window clamped to the slice like the 3D version).
double ssim_2d(const Slice2D& a, const Slice2D& b, double data_range, const losses::SsimConfig& cfg);

struct PlaneMetrics {
  double ssim = 0.0, psnr = 0.0, mae = 0.0, nmae = 0.0;
};

struct SubjectMetrics {
  std::string id;
  double ssim3d = 0.0, psnr3d = 0.0, mae3d = 0.0, nmae3d = 0.0;
  std::array<PlaneMetrics, 3> plane{};  // indexed by Plane

  /// Flat name -> value view: ssim3d ... nmae3d, then ssim_axial ... nmae_sagittal.
  std::vector<std::pair<std::string, double>> flatten() const;
};

struct Aggregate {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation, 0 for one subject
};

struct MetricsReport {
  std::vector<SubjectMetrics> subjects;
  /// Keyed by the flat metric names, in flatten() order.
  std::vector<std::pair<std::string, Aggregate>> summary;
};

struct EvalPair {
  std::string id;
  VolumeGrid generated;
  VolumeGrid truth;
};

/// Metric column names in report order.
std::vector<std::string> metric_names();

SubjectMetrics subject_metrics(const EvalPair& pair, const losses::SsimConfig& cfg = {});
MetricsReport metrics_report(std::span<const EvalPair> pairs, const losses::SsimConfig& cfg = {});

Aggregate aggregate(std::span<const double> values);

}  // namespace cycpl::evalstat
