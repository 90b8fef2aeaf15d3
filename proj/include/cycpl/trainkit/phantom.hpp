#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cycpl/volgrid.hpp"

namespace cycpl::trainkit {

struct ManufacturerModel {
  std::string name;
  double weight = 1.0;  // mixture weight
  double scale = 1.0;   // PET intensity scale
  double bias = 0.0;    // PET intensity offset
};

struct PhantomSpec {
  std::size_t n_subjects = 8;
  Dims dims{32, 32, 32};
  std::uint64_t seed = 0;
  std::vector<ManufacturerModel> manufacturers{
      {"Siemens", 1.0, 1.0, 0.0}, {"GE", 1.0, 1.4, 0.3}, {"Philips", 1.0, 0.8, -0.1}};
  std::size_t hotspot_count = 3;
  double hotspot_min = 0.4;
  double hotspot_max = 1.0;
  /// Hotspot radius (Gaussian sigma) as a fraction of the smallest edge.
  double hotspot_radius = 0.08;
  /// Fraction of each hotspot's amplitude subtracted from the MRI.
  double mri_imprint = 0.5;
  /// Smoothing of the MRI blob field as a fraction of the smallest edge.
  double blob_sigma = 0.08;

  void validate() const;
};

struct PhantomSubject {
  std::string id;
  VolumeGrid mri;
  VolumeGrid pet;
  std::string manufacturer;
};

/// MRI is a smoothed random blob field in (-1, 1). PET is a smooth nonlinear
/// function of the MRI plus regional hotspots (which leave a faint dip in the
/// MRI), followed by the manufacturer's affine intensity map.
std::vector<PhantomSubject> gen_phantom(const PhantomSpec& spec);

/// PET intensity before hotspots and manufacturer effects.
double pet_response(double mri);

/// In-place separable Gaussian smoothing with edge clamping.
void gaussian_smooth(std::vector<double>& field, const Dims& dims, double sigma);

}  // namespace cycpl::trainkit
