#include "cycpl/volume_tensor.hpp"

#include "cycpl/error.hpp"

namespace cycpl {

template <typename T>
ad::Tensor<T> to_tensor(const VolumeGrid& v) {
  const Dims& d = v.dims();
  return ad::Tensor<T>::constant({1, 1, d.d, d.h, d.w},
                                 std::vector<T>(v.data().begin(), v.data().end()));
}

template <typename T>
ad::Tensor<T> to_batch(std::span<const VolumeGrid> vs) {
  if (vs.empty()) fail(ErrorCode::ShapeMismatch, "cannot batch zero volumes");
  const Dims d = vs[0].dims();
  std::vector<T> data;
  data.reserve(vs.size() * d.count());
  for (const auto& v : vs) {
    if (!(v.dims() == d)) fail(ErrorCode::ShapeMismatch, "batched volumes differ in size");
    data.insert(data.end(), v.data().begin(), v.data().end());
  }
  return ad::Tensor<T>::constant({vs.size(), 1, d.d, d.h, d.w}, std::move(data));
}

template <typename T>
VolumeGrid to_volume(const ad::Tensor<T>& t, std::size_t n, Modality modality) {
  if (t.rank() != 5 || t.dim(1) != 1 || n >= t.dim(0))
    fail(ErrorCode::ShapeMismatch, "expected an (N,1,D,H,W) tensor, got " + ad::shape_str(t.shape()));
  const Dims d{t.dim(2), t.dim(3), t.dim(4)};
  const auto v = t.values().subspan(n * d.count(), d.count());
  return VolumeGrid(d, std::vector<float>(v.begin(), v.end()), modality);
}

template ad::Tensor<float> to_tensor(const VolumeGrid&);
template ad::Tensor<double> to_tensor(const VolumeGrid&);
template ad::Tensor<float> to_batch(std::span<const VolumeGrid>);
template ad::Tensor<double> to_batch(std::span<const VolumeGrid>);
template VolumeGrid to_volume(const ad::Tensor<float>&, std::size_t, Modality);
template VolumeGrid to_volume(const ad::Tensor<double>&, std::size_t, Modality);

}  // namespace cycpl
