#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cycpl/volgrid.hpp"

namespace cycpl::stdz {

struct ManufacturerStats {
  double mean = 0.0;
  double std = 0.0;  // population definition

  bool operator==(const ManufacturerStats&) const = default;
};

struct ManufacturerParams {
  double epsilon = 1e-8;
  std::string fitted_on;
  std::map<std::string, ManufacturerStats> manufacturers;

  bool operator==(const ManufacturerParams&) const = default;
};

struct LabeledVolume {
  VolumeGrid volume;
  std::string manufacturer;
};

struct FitOptions {
  double epsilon = 1e-8;
  /// Pool only non-zero voxels (background masking).
  bool mask_zero = false;
  /// Manufacturers that must be present; empty means whatever is seen.
  std::vector<std::string> expected;
};

/// Pooled voxel mean and population std per manufacturer. Throws
/// EmptyManufacturer when an expected manufacturer has no voxels.
ManufacturerParams fit_params(std::span<const LabeledVolume> train, const FitOptions& opt = {});

/// (y - mean) / (std + epsilon). Throws UnknownManufacturer.
VolumeGrid apply_std(const VolumeGrid& y, const std::string& manufacturer,
                     const ManufacturerParams& p);
/// y * (std + epsilon) + mean.
VolumeGrid invert_std(const VolumeGrid& y, const std::string& manufacturer,
                      const ManufacturerParams& p);

/// "fnv1a64:<hex>" over dims, payloads and tags in order.
std::string fingerprint(std::span<const LabeledVolume> volumes);

std::string params_to_json(const ManufacturerParams& p);
ManufacturerParams params_from_json(const std::string& text);
void save_params(const ManufacturerParams& p, const std::filesystem::path& path);
ManufacturerParams load_params(const std::filesystem::path& path);

}  // namespace cycpl::stdz
