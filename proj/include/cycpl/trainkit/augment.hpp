#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "cycpl/volgrid.hpp"

namespace cycpl::trainkit {

struct AugmentConfig {
  double p_elastic = 0.5;
  double p_affine = 0.5;
  double p_flip = 0.5;  // per axis
  double elastic_magnitude_min = 50.0;
  double elastic_magnitude_max = 100.0;
  double elastic_sigma_min = 4.0;
  double elastic_sigma_max = 7.0;
  /// Edge length the elastic parameters refer to; they scale by dims / this.
  double reference_extent = 128.0;
  double max_rotation_deg = 15.0;
  double max_scale = 0.10;
  double noise_std_max = 0.1;

  void validate() const;
};

/// Everything drawn for one call, after scaling to the volume size.
struct AugmentDraw {
  bool elastic = false;
  bool affine = false;
  std::array<bool, 3> flip{};
  double elastic_magnitude = 0.0;
  double elastic_sigma = 0.0;
  std::array<double, 3> rotation_rad{};
  double scale = 1.0;
  double noise_std = 0.0;

  bool geometric() const { return elastic || affine || flip[0] || flip[1] || flip[2]; }
};

/// Draws the augmentation parameters for a seed without touching any volume.
AugmentDraw draw_augment(const Dims& dims, std::uint64_t seed, const AugmentConfig& cfg);

/// Applies identical geometric transforms to the MRI x and PET y, then adds
/// Gaussian noise to x only. Deterministic per seed.
std::pair<VolumeGrid, VolumeGrid> augment_pair(const VolumeGrid& x, const VolumeGrid& y,
                                               std::uint64_t seed, const AugmentConfig& cfg = {},
                                               AugmentDraw* record = nullptr);

/// Reverses the volume along the given axes (0 = D, 1 = H, 2 = W).
VolumeGrid flip_axes(const VolumeGrid& v, const std::array<bool, 3>& axes);

}  // namespace cycpl::trainkit
