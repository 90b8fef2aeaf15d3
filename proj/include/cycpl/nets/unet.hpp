#pragma once

#include <cstdint>
#include <vector>

#include "cycpl/nets/weights.hpp"

namespace cycpl::nets {

struct UNet3DConfig {
  std::vector<std::size_t> channels{8, 16, 32};
  double dropout_p = 0.2;
  double norm_eps = 1e-5;

  void validate() const;
  std::size_t levels() const { return channels.size(); }
  /// Spatial dims must be multiples of this.
  std::size_t divisor() const { return std::size_t{1} << (channels.size() - 1); }
};

/// Parameter names and shapes for the given configuration.
std::map<std::string, ad::Shape> unet_param_shapes(const UNet3DConfig& cfg);

/// He-normal conv kernels, zero biases, unit norm scales and zero shifts.
WeightMap init_weights(const UNet3DConfig& cfg, std::uint64_t seed);

/// x is (N,1,D,H,W); returns the same shape. Dropout after the bottleneck is
/// active only when `training` is set and draws its mask from `dropout_seed`.
template <typename T>
ad::Tensor<T> unet3d_forward(const ParamMap<T>& params, const UNet3DConfig& cfg,
                             const ad::Tensor<T>& x, bool training = false,
                             std::uint64_t dropout_seed = 0);

}  // namespace cycpl::nets
