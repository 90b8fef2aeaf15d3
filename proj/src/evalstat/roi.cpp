#include "cycpl/evalstat/roi.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "cycpl/error.hpp"

namespace cycpl::evalstat {

std::vector<int> LabelMap::rois() const {
  std::set<int> s(labels.begin(), labels.end());
  s.erase(0);
  return {s.begin(), s.end()};
}

LabelMap labels_from_volume(const VolumeGrid& v) {
  LabelMap m;
  m.dims = v.dims();
  m.labels.reserve(v.size());
  for (float x : v.data()) {
    if (x < 0.0f || x != std::floor(x) || x > 2147483647.0f)
      fail(ErrorCode::ParseError, "label maps need non-negative integer voxels");
    m.labels.push_back(static_cast<int>(x));
  }
  return m;
}

double roi_mean(const VolumeGrid& v, const LabelMap& labels, int roi) {
  if (!(v.dims() == labels.dims)) fail(ErrorCode::ShapeMismatch, "label map and volume differ in size");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < labels.labels.size(); ++i)
    if (labels.labels[i] == roi) {
      total += v.data()[i];
      ++count;
    }
  if (count == 0) fail(ErrorCode::EmptyRoi, "ROI " + std::to_string(roi) + " has no voxels");
  return total / static_cast<double>(count);
}

double roi_mse(std::span<const EvalPair> pairs, const LabelMap& labels, int roi) {
  if (pairs.empty()) fail(ErrorCode::Config, "ROI MSE needs at least one subject");
  double acc = 0.0;
  for (const auto& p : pairs) {
    const double d = roi_mean(p.generated, labels, roi) - roi_mean(p.truth, labels, roi);
    acc += d * d;
  }
  return acc / static_cast<double>(pairs.size());
}

RoiTable roi_table(std::span<const EvalPair> pairs, const LabelMap& labels) {
  if (pairs.empty()) fail(ErrorCode::Config, "ROI table needs at least one subject");
  RoiTable t;
  for (int roi : labels.rois()) {
    RoiRow row;
    row.roi = roi;
    for (const auto& p : pairs) {
      row.subjects.push_back(p.id);
      row.truth.push_back(roi_mean(p.truth, labels, roi));
      row.generated.push_back(roi_mean(p.generated, labels, roi));
    }
    row.mse = roi_mse(pairs, labels, roi);
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace cycpl::evalstat
