#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cycpl/nets/weights.hpp"

namespace cycpl::nets {

enum class LayerKind { ConvRelu, MaxPool };

struct LayerSpec {
  LayerKind kind = LayerKind::ConvRelu;
  std::size_t out_channels = 0;  // ConvRelu only
  std::size_t kernel = 3;        // conv kernel edge (same padding) or pool size
  bool bias = false;
};

/// Frozen convolutional feature stack. Layer i (0-based) stores its kernel as
/// "layers.<i>.weight" (Cout,Cin,k,k[,k]) and, when present, "layers.<i>.bias".
class FeatureExtractor {
 public:
  FeatureExtractor(int spatial_dims, std::vector<LayerSpec> layers, std::size_t tap,
                   WeightMap weights);

  int spatial_dims() const { return spatial_dims_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  /// 1-based index of the returned layer output; always a ConvRelu layer.
  std::size_t tap() const { return tap_; }
  std::size_t input_channels() const { return input_channels_; }
  std::size_t output_channels() const;
  const WeightMap& weights() const { return weights_; }

  /// x is (N,C,H,W) for 2D or (N,C,D,H,W) for 3D with C == 1 or
  /// C == input_channels(); a single channel is replicated when needed.
  /// Gradients reach x only.
  template <typename T>
  ad::Tensor<T> extract(const ad::Tensor<T>& x) const;

  /// Feature shape (without the batch axis) for one input of the given
  /// spatial extent.
  ad::Shape feature_shape(const ad::Shape& spatial) const;

 private:
  template <typename T>
  const ParamMap<T>& frozen() const;

  int spatial_dims_;
  std::vector<LayerSpec> layers_;
  std::size_t tap_;
  std::size_t input_channels_ = 1;
  WeightMap weights_;
  ParamMap<float> frozen_f_;
  ParamMap<double> frozen_d_;
};

/// conv(4)+ReLU, pool2, conv(8)+ReLU with the tap on the last layer.
std::vector<LayerSpec> tiny_vgg_layers();

/// Bias-free tiny stack with He-normal kernels drawn from `seed`.
FeatureExtractor make_tiny_extractor(int spatial_dims, std::uint64_t seed);

/// Single 1x1 conv with weight 1 and bias 0, then ReLU.
FeatureExtractor make_identity_extractor(int spatial_dims);

/// Tiny stack with weights read from a CPWT file.
FeatureExtractor load_tiny_extractor(int spatial_dims, const std::filesystem::path& path);

/// Seed of the committed default extractor weights.
inline constexpr std::uint64_t kDefaultExtractorSeed = 20240601;

/// Path of the committed default weights for 2D or 3D.
std::filesystem::path default_extractor_path(int spatial_dims);

/// Loads the committed defaults, falling back to regenerating them from the
/// fixed seed when the asset is absent.
FeatureExtractor default_extractor(int spatial_dims);

}  // namespace cycpl::nets
