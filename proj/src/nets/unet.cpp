// Encoder level l: two (conv3 -> instance norm -> ReLU) blocks, max-pool between
// levels. Decoder level l: nearest upsample, 1x1 conv + norm + ReLU down to the
// skip width, concat with the skip, then the same double block. A 1x1 conv
// with bias maps the top level features plus the raw input (instance norm
// discards absolute intensity, the input channel restores it) to one
// channel. Convs feeding a norm have no bias (the norm shift absorbs it).

#include "cycpl/nets/unet.hpp"

#include "cycpl/autodiff/ops.hpp"
#include "cycpl/error.hpp"

namespace cycpl::nets {

namespace {

std::string enc(std::size_t l) { return "enc" + std::to_string(l); }
std::string dec(std::size_t l) { return "dec" + std::to_string(l); }

void add_block(std::map<std::string, ad::Shape>& s, const std::string& p, std::size_t cin,
               std::size_t cout, std::size_t k = 3) {
  s[p + ".weight"] = {cout, cin, k, k, k};
  s[p + ".norm.gamma"] = {cout};
  s[p + ".norm.beta"] = {cout};
}

template <typename T>
ad::Tensor<T> block(const ParamMap<T>& p, const std::string& name, const ad::Tensor<T>& x,
                    double eps) {
  auto it = p.find(name + ".weight");
  if (it == p.end()) fail(ErrorCode::ShapeMismatch, "missing U-Net parameter " + name + ".weight");
  const std::size_t pad = it->second.dim(2) / 2;
  ad::Tensor<T> h = ad::conv3d(x, it->second, ad::Tensor<T>(), {1, 1, 1}, {pad, pad, pad});
  h = ad::instance_norm3d(h, p.at(name + ".norm.gamma"), p.at(name + ".norm.beta"), eps);
  return ad::relu(h);
}

}  // namespace

void UNet3DConfig::validate() const {
  if (channels.size() < 2) fail(ErrorCode::InvalidAttribute, "U-Net needs at least 2 levels");
  for (std::size_t c : channels)
    if (c == 0) fail(ErrorCode::InvalidAttribute, "U-Net channel counts must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0))
    fail(ErrorCode::InvalidAttribute, "U-Net dropout must be in [0, 1)");
  if (!(norm_eps > 0.0)) fail(ErrorCode::InvalidAttribute, "U-Net norm eps must be positive");
}

std::map<std::string, ad::Shape> unet_param_shapes(const UNet3DConfig& cfg) {
  cfg.validate();
  std::map<std::string, ad::Shape> s;
  const auto& c = cfg.channels;
  std::size_t cin = 1;
  for (std::size_t l = 0; l < c.size(); ++l) {
    add_block(s, enc(l) + ".conv1", cin, c[l]);
    add_block(s, enc(l) + ".conv2", c[l], c[l]);
    cin = c[l];
  }
  for (std::size_t l = 0; l + 1 < c.size(); ++l) {
    add_block(s, dec(l) + ".up", c[l + 1], c[l], 1);
    add_block(s, dec(l) + ".conv1", 2 * c[l], c[l]);
    add_block(s, dec(l) + ".conv2", c[l], c[l]);
  }
  s["out.weight"] = {1, c[0] + 1, 1, 1, 1};
  s["out.bias"] = {1};
  return s;
}

WeightMap init_weights(const UNet3DConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  WeightMap w;
  for (const auto& [name, shape] : unet_param_shapes(cfg)) {
    const auto n = ad::numel(shape);
    if (name.ends_with(".weight")) {
      w.emplace(name, he_normal(shape, n / shape[0], rng));
    } else if (name.ends_with(".gamma")) {
      w.emplace(name, NdArray{shape, std::vector<float>(n, 1.0f)});
    } else {
      w.emplace(name, NdArray{shape, std::vector<float>(n, 0.0f)});
    }
  }
  return w;
}

template <typename T>
ad::Tensor<T> unet3d_forward(const ParamMap<T>& params, const UNet3DConfig& cfg,
                             const ad::Tensor<T>& x, bool training, std::uint64_t dropout_seed) {
  const auto shapes = unet_param_shapes(cfg);
  if (params.size() != shapes.size())
    fail(ErrorCode::ShapeMismatch, "U-Net expects " + std::to_string(shapes.size()) +
                                       " parameters, got " + std::to_string(params.size()));
  for (const auto& [name, shape] : shapes) {
    auto it = params.find(name);
    if (it == params.end()) fail(ErrorCode::ShapeMismatch, "missing U-Net parameter " + name);
    if (it->second.shape() != shape)
      fail(ErrorCode::ShapeMismatch, "U-Net parameter " + name + " has shape " +
                                         ad::shape_str(it->second.shape()) + ", expected " +
                                         ad::shape_str(shape));
  }
  if (x.rank() != 5 || x.dim(1) != 1)
    fail(ErrorCode::ShapeMismatch, "U-Net expects (N,1,D,H,W), got " + ad::shape_str(x.shape()));
  const std::size_t div = cfg.divisor();
  for (std::size_t a = 2; a < 5; ++a)
    if (x.dim(a) % div != 0 || x.dim(a) < div)
      fail(ErrorCode::ShapeMismatch, "U-Net spatial dims must be multiples of " +
                                         std::to_string(div) + ", got " + ad::shape_str(x.shape()));

  const double eps = cfg.norm_eps;
  const std::size_t L = cfg.levels();
  std::vector<ad::Tensor<T>> skips;
  ad::Tensor<T> h = x;
  for (std::size_t l = 0; l < L; ++l) {
    if (l > 0) h = ad::max_pool3d(h, 2);
    h = block(params, enc(l) + ".conv1", h, eps);
    h = block(params, enc(l) + ".conv2", h, eps);
    skips.push_back(h);
  }
  h = ad::dropout(h, cfg.dropout_p, dropout_seed, training);
  for (std::size_t l = L - 1; l-- > 0;) {
    h = ad::nearest_upsample3d(h, 2);
    h = block(params, dec(l) + ".up", h, eps);
    const ad::Tensor<T> cat[2] = {skips[l], h};
    h = ad::concat<T>(cat, 1);
    h = block(params, dec(l) + ".conv1", h, eps);
    h = block(params, dec(l) + ".conv2", h, eps);
  }
  const ad::Tensor<T> head[2] = {h, x};
  return ad::conv3d(ad::concat<T>(head, 1), params.at("out.weight"), params.at("out.bias"));
}

template ad::Tensor<float> unet3d_forward(const ParamMap<float>&, const UNet3DConfig&,
                                          const ad::Tensor<float>&, bool, std::uint64_t);
template ad::Tensor<double> unet3d_forward(const ParamMap<double>&, const UNet3DConfig&,
                                           const ad::Tensor<double>&, bool, std::uint64_t);

}  // namespace cycpl::nets
