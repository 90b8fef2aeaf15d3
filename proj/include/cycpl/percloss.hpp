#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "cycpl/autodiff/tensor.hpp"
#include "cycpl/nets/extractor.hpp"
#include "cycpl/volgrid.hpp"

namespace cycpl::perc {

/// Cycles of three equal plane segments (axial, coronal, sagittal) whose
/// segment length decays geometrically: T_{k+1} = max(1, round(gamma * T_k)),
/// rounding half away from zero. Cycle k starts at s_k = s_{k-1} + 3 T_{k-1}.
class PlaneSchedule {
 public:
  PlaneSchedule(std::size_t t0, double gamma);

  std::size_t t0() const { return t0_; }
  double gamma() const { return gamma_; }

  std::size_t duration(std::size_t k) const;     // T_k
  std::size_t cycle_start(std::size_t k) const;  // s_k
  std::size_t cycle_of(std::size_t epoch) const; // k with s_k <= e < s_{k+1}
  Plane active_plane(std::size_t epoch) const;

 private:
  void extend(std::size_t k) const;

  std::size_t t0_;
  double gamma_;
  mutable std::vector<std::size_t> durations_;
  mutable std::vector<std::size_t> starts_;
};

/// Next segment length from the current one.
std::size_t next_duration(std::size_t t, double gamma);

struct PercConfig {
  std::shared_ptr<const nets::FeatureExtractor> extractor_2d;
  std::shared_ptr<const nets::FeatureExtractor> extractor_3d;
  double eps_mm = 1e-6;
  Plane baseline_plane = Plane::Sagittal;
  /// Treat the min and max of each normalized slice (or volume) as constants.
  bool detach_minmax = true;

  void validate() const;
};

/// Default extractors with the remaining fields at their defaults.
PercConfig default_perc_config();

// yhat and y are (N,1,D,H,W); slices of every sample form one batch.

/// Slices along `plane` as an (N*S,1,rows,cols) tensor.
template <typename T>
ad::Tensor<T> slice_batch(const ad::Tensor<T>& v, Plane plane);

/// Mean over slices of the feature MSE between min-max normalized slices.
template <typename T>
ad::Tensor<T> plane_perc_loss(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, Plane plane,
                              const PercConfig& cfg);

template <typename T>
ad::Tensor<T> perc_2d(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, const PercConfig& cfg);

/// Feature MSE of the 3D extractor on whole-volume normalized inputs.
template <typename T>
ad::Tensor<T> perc_3d(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, const PercConfig& cfg);

/// Axial + coronal + sagittal plane losses.
template <typename T>
ad::Tensor<T> perc_25d(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, const PercConfig& cfg);

/// Plane loss of the plane active at `epoch`.
template <typename T>
ad::Tensor<T> cyclic_25d(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, std::size_t epoch,
                         const PlaneSchedule& sched, const PercConfig& cfg);

}  // namespace cycpl::perc
