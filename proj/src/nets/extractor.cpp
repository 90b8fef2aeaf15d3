#include "cycpl/nets/extractor.hpp"

#include "cycpl/autodiff/ops.hpp"
#include "cycpl/error.hpp"

namespace cycpl::nets {

namespace {

std::string weight_name(std::size_t i) { return "layers." + std::to_string(i) + ".weight"; }
std::string bias_name(std::size_t i) { return "layers." + std::to_string(i) + ".bias"; }

}  // namespace

FeatureExtractor::FeatureExtractor(int spatial_dims, std::vector<LayerSpec> layers,
                                   std::size_t tap, WeightMap weights)
    : spatial_dims_(spatial_dims), layers_(std::move(layers)), tap_(tap),
      weights_(std::move(weights)) {
  if (spatial_dims_ != 2 && spatial_dims_ != 3)
    fail(ErrorCode::InvalidAttribute, "extractor must be 2D or 3D");
  if (tap_ < 1 || tap_ > layers_.size())
    fail(ErrorCode::InvalidAttribute, "extractor tap index out of range");
  if (layers_[tap_ - 1].kind != LayerKind::ConvRelu)
    fail(ErrorCode::InvalidAttribute, "extractor tap must point at a ReLU output");

  std::size_t used = 0;
  std::size_t channels = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    if (l.kernel < 1) fail(ErrorCode::InvalidAttribute, "extractor kernel must be >= 1");
    if (l.kind == LayerKind::MaxPool) continue;
    if (l.kernel % 2 == 0) fail(ErrorCode::InvalidAttribute, "extractor conv kernel must be odd");
    auto it = weights_.find(weight_name(i));
    if (it == weights_.end()) fail(ErrorCode::MissingField, "missing tensor " + weight_name(i));
    const ad::Shape& s = it->second.shape;
    if (s.size() != static_cast<std::size_t>(spatial_dims_) + 2 || s[0] != l.out_channels)
      fail(ErrorCode::ShapeMismatch, weight_name(i) + " has shape " + ad::shape_str(s));
    for (std::size_t d = 2; d < s.size(); ++d)
      if (s[d] != l.kernel) fail(ErrorCode::ShapeMismatch, weight_name(i) + " kernel size");
    if (channels == 0) {
      input_channels_ = s[1];
    } else if (s[1] != channels) {
      fail(ErrorCode::ShapeMismatch, weight_name(i) + " input channels do not chain");
    }
    channels = s[0];
    ++used;
    if (l.bias) {
      auto b = weights_.find(bias_name(i));
      if (b == weights_.end()) fail(ErrorCode::MissingField, "missing tensor " + bias_name(i));
      if (b->second.data.size() != l.out_channels)
        fail(ErrorCode::ShapeMismatch, bias_name(i) + " must have Cout elements");
      ++used;
    }
  }
  if (used != weights_.size())
    fail(ErrorCode::InvalidAttribute, "extractor weight file has unused tensors");
  frozen_f_ = to_params<float>(weights_, false);
  frozen_d_ = to_params<double>(weights_, false);
}

std::size_t FeatureExtractor::output_channels() const { return layers_[tap_ - 1].out_channels; }

template <>
const ParamMap<float>& FeatureExtractor::frozen<float>() const { return frozen_f_; }
template <>
const ParamMap<double>& FeatureExtractor::frozen<double>() const { return frozen_d_; }

template <typename T>
ad::Tensor<T> FeatureExtractor::extract(const ad::Tensor<T>& x) const {
  const std::size_t rank = static_cast<std::size_t>(spatial_dims_) + 2;
  if (x.rank() != rank)
    fail(ErrorCode::ShapeMismatch, "extractor expects a rank-" + std::to_string(rank) +
                                       " input, got " + ad::shape_str(x.shape()));
  ad::Tensor<T> h = x;
  if (x.dim(1) != input_channels_) {
    if (x.dim(1) != 1)
      fail(ErrorCode::ShapeMismatch, "extractor input has " + std::to_string(x.dim(1)) +
                                         " channels, expected 1 or " +
                                         std::to_string(input_channels_));
    std::vector<ad::Tensor<T>> reps(input_channels_, x);
    h = ad::concat<T>(reps, 1);
  }
  const auto& p = frozen<T>();
  for (std::size_t i = 0; i < tap_; ++i) {
    const LayerSpec& l = layers_[i];
    if (l.kind == LayerKind::MaxPool) {
      h = spatial_dims_ == 2 ? ad::max_pool2d(h, l.kernel) : ad::max_pool3d(h, l.kernel);
      continue;
    }
    const ad::Tensor<T>& w = p.at(weight_name(i));
    const ad::Tensor<T> b = l.bias ? p.at(bias_name(i)) : ad::Tensor<T>();
    const std::size_t pad = l.kernel / 2;
    h = spatial_dims_ == 2 ? ad::conv2d(h, w, b, 1, pad)
                           : ad::conv3d(h, w, b, {1, 1, 1}, {pad, pad, pad});
    h = ad::relu(h);
  }
  return h;
}

ad::Shape FeatureExtractor::feature_shape(const ad::Shape& spatial) const {
  if (spatial.size() != static_cast<std::size_t>(spatial_dims_))
    fail(ErrorCode::ShapeMismatch, "spatial extent rank does not match the extractor");
  ad::Shape s = spatial;
  for (std::size_t i = 0; i < tap_; ++i)
    if (layers_[i].kind == LayerKind::MaxPool)
      for (auto& d : s) d /= layers_[i].kernel;
  s.insert(s.begin(), output_channels());
  return s;
}

std::vector<LayerSpec> tiny_vgg_layers() {
  return {{LayerKind::ConvRelu, 4, 3, false},
          {LayerKind::MaxPool, 0, 2, false},
          {LayerKind::ConvRelu, 8, 3, false}};
}

FeatureExtractor make_tiny_extractor(int spatial_dims, std::uint64_t seed) {
  const auto layers = tiny_vgg_layers();
  Rng rng(seed);
  WeightMap w;
  std::size_t cin = 1;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind != LayerKind::ConvRelu) continue;
    ad::Shape s{layers[i].out_channels, cin};
    std::size_t fan_in = cin;
    for (int d = 0; d < spatial_dims; ++d) {
      s.push_back(layers[i].kernel);
      fan_in *= layers[i].kernel;
    }
    w.emplace(weight_name(i), he_normal(s, fan_in, rng));
    cin = layers[i].out_channels;
  }
  return FeatureExtractor(spatial_dims, layers, layers.size(), std::move(w));
}

FeatureExtractor make_identity_extractor(int spatial_dims) {
  ad::Shape s{1, 1, 1, 1};
  if (spatial_dims == 3) s.push_back(1);
  WeightMap w;
  w.emplace(weight_name(0), NdArray{s, {1.0f}});
  w.emplace(bias_name(0), NdArray{{1}, {0.0f}});
  return FeatureExtractor(spatial_dims, {{LayerKind::ConvRelu, 1, 1, true}}, 1, std::move(w));
}

FeatureExtractor load_tiny_extractor(int spatial_dims, const std::filesystem::path& path) {
  const auto layers = tiny_vgg_layers();
  return FeatureExtractor(spatial_dims, layers, layers.size(), load_weights(path));
}

std::filesystem::path default_extractor_path(int spatial_dims) {
  return std::filesystem::path(CYCPL_ASSET_DIR) /
         (spatial_dims == 2 ? "tiny_vgg2d.cpwt" : "tiny_vgg3d.cpwt");
}

FeatureExtractor default_extractor(int spatial_dims) {
  const auto path = default_extractor_path(spatial_dims);
  if (std::filesystem::exists(path)) return load_tiny_extractor(spatial_dims, path);
  return make_tiny_extractor(spatial_dims, kDefaultExtractorSeed + static_cast<std::uint64_t>(spatial_dims));
}

template ad::Tensor<float> FeatureExtractor::extract(const ad::Tensor<float>&) const;
template ad::Tensor<double> FeatureExtractor::extract(const ad::Tensor<double>&) const;

}  // namespace cycpl::nets
