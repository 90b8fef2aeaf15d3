#pragma once

#include "cycpl/autodiff/tensor.hpp"
#include "cycpl/volgrid.hpp"

namespace cycpl {

/// (1,1,D,H,W) constant tensor holding the volume.
template <typename T>
ad::Tensor<T> to_tensor(const VolumeGrid& v);

/// Stacks equally sized volumes into an (N,1,D,H,W) constant tensor.
template <typename T>
ad::Tensor<T> to_batch(std::span<const VolumeGrid> vs);

/// Sample `n` of an (N,1,D,H,W) tensor as a volume. Throws NonFinite when
/// the values are not finite.
template <typename T>
VolumeGrid to_volume(const ad::Tensor<T>& t, std::size_t n = 0, Modality modality = Modality::PET);

}  // namespace cycpl
