#include "cycpl/losses.hpp"

#include <algorithm>
#include <cmath>

#include "cycpl/autodiff/ops.hpp"
#include "cycpl/error.hpp"
#include "cycpl/volume_tensor.hpp"

namespace cycpl::losses {

void SsimConfig::validate() const {
  if (window_size < 3 || window_size % 2 == 0)
    fail(ErrorCode::InvalidAttribute, "SSIM window must be odd and >= 3");
  if (!(sigma > 0.0)) fail(ErrorCode::InvalidAttribute, "SSIM sigma must be positive");
  if (!(k1 > 0.0) || !(k2 > 0.0)) fail(ErrorCode::InvalidAttribute, "SSIM k1 and k2 must be positive");
  if (range_mode == RangeMode::Fixed && !(fixed_range > 0.0))
    fail(ErrorCode::InvalidAttribute, "SSIM fixed data range must be positive");
}

std::size_t SsimConfig::effective_window(std::size_t min_dim) const {
  std::size_t w = std::min(window_size, min_dim);
  if (w % 2 == 0) --w;
  if (w < 3)
    fail(ErrorCode::WindowTooLarge, "volume edge " + std::to_string(min_dim) +
                                        " is too small for a 3-voxel SSIM window");
  return w;
}

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> g(size);
  const double c = 0.5 * static_cast<double>(size - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - c;
    g[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

namespace {

template <typename T>
void check_pair(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y) {
  if (yhat.rank() != 5 || yhat.dim(1) != 1)
    fail(ErrorCode::ShapeMismatch, "expected an (N,1,D,H,W) volume, got " + ad::shape_str(yhat.shape()));
  if (yhat.shape() != y.shape())
    fail(ErrorCode::ShapeMismatch, "prediction " + ad::shape_str(yhat.shape()) +
                                       " and target " + ad::shape_str(y.shape()) + " differ");
}

/// Separable valid-position Gaussian filter over the three spatial axes.
template <typename T>
ad::Tensor<T> gaussian_filter(const ad::Tensor<T>& x, const std::vector<double>& g) {
  const std::size_t w = g.size();
  const std::vector<T> taps(g.begin(), g.end());
  ad::Tensor<T> h = x;
  for (std::size_t axis = 0; axis < 3; ++axis) {
    ad::Shape ks{1, 1, 1, 1, 1};
    ks[2 + axis] = w;
    h = ad::conv3d(h, ad::Tensor<T>::constant(ks, taps), ad::Tensor<T>());
  }
  return h;
}

}  // namespace

template <typename T>
ad::Tensor<T> ssim(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, const SsimConfig& cfg) {
  check_pair(yhat, y);
  cfg.validate();
  const std::size_t n = yhat.dim(0);
  const std::size_t win =
      cfg.effective_window(std::min({yhat.dim(2), yhat.dim(3), yhat.dim(4)}));

  double range = cfg.fixed_range;
  if (cfg.range_mode == RangeMode::GroundTruth) {
    const auto [lo, hi] = std::minmax_element(y.values().begin(), y.values().end());
    range = static_cast<double>(*hi) - static_cast<double>(*lo);
    if (!(range > 0.0)) range = 1.0;
  }
  const double c1 = (cfg.k1 * range) * (cfg.k1 * range);
  const double c2 = (cfg.k2 * range) * (cfg.k2 * range);

  // Filter x, y, x^2, y^2 and xy in one batched pass.
  const ad::Tensor<T> maps[5] = {yhat, y, ad::square(yhat), ad::square(y), ad::mul(yhat, y)};
  const ad::Tensor<T> f = gaussian_filter(ad::concat<T>(maps, 0), gaussian_window(win, cfg.sigma));
  const ad::Shape part{n, 1, f.dim(2), f.dim(3), f.dim(4)};
  const auto pick = [&](std::size_t i) {
    const ad::Tensor<T> s = ad::reshape(f, {5, ad::numel(part)});
    return ad::reshape(ad::slice_view(s, 0, i), part);
  };
  const auto mx = pick(0), my = pick(1);
  const auto mxx = ad::mul(mx, mx), myy = ad::mul(my, my), mxy = ad::mul(mx, my);
  const auto vx = ad::sub(pick(2), mxx);
  const auto vy = ad::sub(pick(3), myy);
  const auto cxy = ad::sub(pick(4), mxy);
  const auto num = ad::mul(ad::add_scalar(ad::scalar_mul(mxy, 2.0), c1),
                           ad::add_scalar(ad::scalar_mul(cxy, 2.0), c2));
  const auto den = ad::mul(ad::add_scalar(ad::add(mxx, myy), c1),
                           ad::add_scalar(ad::add(vx, vy), c2));
  return ad::mean(ad::div(num, den));
}

template <typename T>
ad::Tensor<T> ssim_loss(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, const SsimConfig& cfg) {
  return ad::add_scalar(ad::scalar_mul(ssim(yhat, y, cfg), -1.0), 1.0);
}

template <typename T>
ad::Tensor<T> voxel_mse(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y) {
  check_pair(yhat, y);
  return ad::mean(ad::square(ad::sub(yhat, y)));
}

double ssim_value(const VolumeGrid& yhat, const VolumeGrid& y, const SsimConfig& cfg) {
  if (!(yhat.dims() == y.dims())) fail(ErrorCode::ShapeMismatch, "SSIM of differently sized volumes");
  ad::NoGradGuard guard;
  return ssim(to_tensor<double>(yhat), to_tensor<double>(y), cfg).item();
}

std::string_view to_string(PercMode m) {
  switch (m) {
    case PercMode::Cyclic25d: return "cyclic25d";
    case PercMode::D2: return "2d";
    case PercMode::D3: return "3d";
    case PercMode::D25: return "25d";
    case PercMode::None: return "none";
  }
  return "?";
}

PercMode parse_perc_mode(std::string_view s) {
  for (PercMode m : {PercMode::Cyclic25d, PercMode::D2, PercMode::D3, PercMode::D25, PercMode::None})
    if (s == to_string(m)) return m;
  fail(ErrorCode::Config, "unknown perceptual mode '" + std::string(s) +
                              "' (expected cyclic25d, 2d, 3d, 25d or none)");
}

void CombinedLossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    fail(ErrorCode::InvalidAttribute, "lambda must be finite and >= 0");
}

template <typename T>
LossTerms<T> combined_loss_terms(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y,
                                 std::size_t epoch, const CombinedLossConfig& cfg,
                                 const perc::PercConfig& perc_cfg, const SsimConfig& ssim_cfg) {
  cfg.validate();
  LossTerms<T> t;
  t.voxel = voxel_mse(yhat, y);
  t.ssim = ssim_loss(yhat, y, ssim_cfg);
  t.total = ad::add(t.voxel, t.ssim);
  switch (cfg.perc_mode) {
    case PercMode::Cyclic25d: t.perc = perc::cyclic_25d(yhat, y, epoch, cfg.schedule, perc_cfg); break;
    case PercMode::D2: t.perc = perc::perc_2d(yhat, y, perc_cfg); break;
    case PercMode::D3: t.perc = perc::perc_3d(yhat, y, perc_cfg); break;
    case PercMode::D25: t.perc = perc::perc_25d(yhat, y, perc_cfg); break;
    case PercMode::None: break;
  }
  if (t.perc.defined()) t.total = ad::add(t.total, ad::scalar_mul(t.perc, cfg.lambda));
  return t;
}

template <typename T>
ad::Tensor<T> combined_loss(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, std::size_t epoch,
                            const CombinedLossConfig& cfg, const perc::PercConfig& perc_cfg,
                            const SsimConfig& ssim_cfg) {
  return combined_loss_terms(yhat, y, epoch, cfg, perc_cfg, ssim_cfg).total;
}

#define CYCPL_LOSS_INSTANTIATE(T)                                                             \
  template ad::Tensor<T> ssim(const ad::Tensor<T>&, const ad::Tensor<T>&, const SsimConfig&); \
  template ad::Tensor<T> ssim_loss(const ad::Tensor<T>&, const ad::Tensor<T>&,                \
                                   const SsimConfig&);                                        \
  template ad::Tensor<T> voxel_mse(const ad::Tensor<T>&, const ad::Tensor<T>&);               \
  template LossTerms<T> combined_loss_terms(const ad::Tensor<T>&, const ad::Tensor<T>&,       \
                                            std::size_t, const CombinedLossConfig&,           \
                                            const perc::PercConfig&, const SsimConfig&);      \
  template ad::Tensor<T> combined_loss(const ad::Tensor<T>&, const ad::Tensor<T>&,            \
                                       std::size_t, const CombinedLossConfig&,                \
                                       const perc::PercConfig&, const SsimConfig&);

CYCPL_LOSS_INSTANTIATE(float)
CYCPL_LOSS_INSTANTIATE(double)

}  // namespace cycpl::losses
