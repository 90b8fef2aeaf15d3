#pragma once

#include <span>
#include <string>
#include <vector>

#include "cycpl/evalstat/metrics.hpp"
#include "cycpl/volgrid.hpp"

namespace cycpl::evalstat {

/// Integer voxel labels; 0 is background.
struct LabelMap {
  Dims dims;
  std::vector<int> labels;

  /// Sorted distinct non-zero labels.
  std::vector<int> rois() const;
};

/// Labels from a volume with non-negative integer values; throws ParseError.
LabelMap labels_from_volume(const VolumeGrid& v);

/// Mean of v over the voxels carrying `roi`; throws EmptyRoi.
double roi_mean(const VolumeGrid& v, const LabelMap& labels, int roi);

/// Mean over subjects of the squared difference of generated and true ROI means.
double roi_mse(std::span<const EvalPair> pairs, const LabelMap& labels, int roi);

struct RoiRow {
  int roi = 0;
  std::vector<std::string> subjects;
  std::vector<double> truth;
  std::vector<double> generated;
  double mse = 0.0;
};

struct RoiTable {
  std::vector<RoiRow> rows;
};

RoiTable roi_table(std::span<const EvalPair> pairs, const LabelMap& labels);

}  // namespace cycpl::evalstat
