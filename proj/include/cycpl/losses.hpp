#pragma once

#include <cstddef>
#include <string_view>

#include "cycpl/autodiff/tensor.hpp"
#include "cycpl/percloss.hpp"
#include "cycpl/volgrid.hpp"

namespace cycpl::losses {

enum class RangeMode { GroundTruth, Fixed };

struct SsimConfig {
  std::size_t window_size = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  RangeMode range_mode = RangeMode::GroundTruth;
  double fixed_range = 1.0;

  void validate() const;
  /// Window edge actually used for a volume whose smallest edge is `min_dim`:
  /// the configured size, shrunk to the largest odd value that fits.
  std::size_t effective_window(std::size_t min_dim) const;
};

/// Normalized 1D Gaussian taps.
std::vector<double> gaussian_window(std::size_t size, double sigma);

/// Mean local SSIM over valid window positions. In GroundTruth mode the
/// data range is max(y) - min(y), or 1 when y is constant.
template <typename T>
ad::Tensor<T> ssim(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, const SsimConfig& cfg);

template <typename T>
ad::Tensor<T> ssim_loss(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, const SsimConfig& cfg);

template <typename T>
ad::Tensor<T> voxel_mse(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y);

/// SSIM of two volumes in double precision.
double ssim_value(const VolumeGrid& yhat, const VolumeGrid& y, const SsimConfig& cfg = {});

enum class PercMode { Cyclic25d, D2, D3, D25, None };

std::string_view to_string(PercMode m);
PercMode parse_perc_mode(std::string_view s);

struct CombinedLossConfig {
  double lambda = 0.5;
  PercMode perc_mode = PercMode::Cyclic25d;
  perc::PlaneSchedule schedule{120, 0.67};

  void validate() const;
};

template <typename T>
struct LossTerms {
  ad::Tensor<T> total;
  ad::Tensor<T> voxel;
  ad::Tensor<T> ssim;
  ad::Tensor<T> perc;  // undefined in PercMode::None
};

/// voxel MSE + (1 - SSIM) + lambda * perceptual term.
template <typename T>
LossTerms<T> combined_loss_terms(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y,
                                 std::size_t epoch, const CombinedLossConfig& cfg,
                                 const perc::PercConfig& perc_cfg, const SsimConfig& ssim_cfg);

template <typename T>
ad::Tensor<T> combined_loss(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, std::size_t epoch,
                            const CombinedLossConfig& cfg, const perc::PercConfig& perc_cfg,
                            const SsimConfig& ssim_cfg);

}  // namespace cycpl::losses
