#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cycpl/autodiff/tensor.hpp"

namespace cycpl::ad {

// Element-wise binary ops require identical shapes; the only broadcasting is
// tensor-by-constant through scalar_mul / add_scalar.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scalar_mul(const Tensor<T>& a, double c);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, double c);

/// (M,K) x (K,N) -> (M,N)
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

using Triple = std::array<std::size_t, 3>;

/// x (N,Cin,D,H,W), weight (Cout,Cin,kD,kH,kW), optional bias (Cout).
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 Triple stride = {1, 1, 1}, Triple padding = {0, 0, 0});
/// x (N,Cin,H,W), weight (Cout,Cin,kH,kW), optional bias (Cout).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t padding = 0);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);

/// Non-overlapping max pooling (kernel == stride) over the trailing 2 or 3 axes.
template <typename T> Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t kernel = 2);
template <typename T> Tensor<T> max_pool3d(const Tensor<T>& x, std::size_t kernel = 2);
template <typename T> Tensor<T> nearest_upsample3d(const Tensor<T>& x, std::size_t factor = 2);

/// Per-(sample, channel) normalization over the spatial axes of an
/// (N,C,...) tensor, then an optional per-channel affine.
template <typename T>
Tensor<T> instance_norm3d(const Tensor<T>& x, const Tensor<T>& gamma = {},
                          const Tensor<T>& beta = {}, double eps = 1e-5);

/// Inverted dropout; identity when !training or p == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, std::uint64_t seed, bool training);

template <typename T> Tensor<T> mean(const Tensor<T>& x);
template <typename T> Tensor<T> sum(const Tensor<T>& x);

template <typename T> Tensor<T> concat(std::span<const Tensor<T>> xs, std::size_t axis);
/// Selects one index along an axis and drops that axis.
template <typename T> Tensor<T> slice_view(const Tensor<T>& x, std::size_t axis, std::size_t index);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T> Tensor<T> permute(const Tensor<T>& x, std::vector<std::size_t> perm);

/// Min-max normalization within groups formed by the leading `group_dims`
/// axes: (x - min) / (max - min + eps). With detach_stats the group min and
/// max are treated as constants for the gradient.
template <typename T>
Tensor<T> minmax_normalize(const Tensor<T>& x, double eps, std::size_t group_dims,
                           bool detach_stats = true);

template <typename T> Tensor<T> stop_gradient(const Tensor<T>& x);

/// Descriptor-driven dispatch over every primitive kind.
struct PrimitiveOp {
  OpKind kind = OpKind::Add;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t kernel = 2;
  std::size_t factor = 2;
  std::size_t axis = 0;
  std::size_t index = 0;
  std::size_t group_dims = 1;
  double p = 0.0;
  double scalar = 1.0;
  double eps = 1e-5;
  std::uint64_t seed = 0;
  bool training = true;
  bool detach_stats = true;
  Shape shape;
  std::vector<std::size_t> perm;

  /// Throws InvalidAttribute for out-of-range attributes.
  void validate() const;
};

template <typename T>
Tensor<T> forward(const PrimitiveOp& op, std::span<const Tensor<T>> inputs);

}  // namespace cycpl::ad
