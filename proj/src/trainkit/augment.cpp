#include "cycpl/trainkit/augment.hpp"

#include <cmath>
#include <numbers>

#include "cycpl/error.hpp"
#include "cycpl/rng.hpp"
#include "cycpl/trainkit/phantom.hpp"

namespace cycpl::trainkit {

namespace {

enum Stream : std::uint64_t { kDraws = 0, kElastic = 1, kNoise = 2 };

AffineMap make_affine(const Dims& d, const AugmentDraw& a) {
  const auto rot = [](int i, int j, double t) {
    std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    m[i][i] = std::cos(t);
    m[i][j] = -std::sin(t);
    m[j][i] = std::sin(t);
    m[j][j] = std::cos(t);
    return m;
  };
  const auto mul = [](const auto& a, const auto& b) {
    std::array<std::array<double, 3>, 3> m{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) m[i][j] += a[i][k] * b[k][j];
    return m;
  };
  AffineMap map;
  // rotations about the D, H and W axes
  auto lin = mul(mul(rot(1, 2, a.rotation_rad[0]), rot(0, 2, a.rotation_rad[1])),
                 rot(0, 1, a.rotation_rad[2]));
  // sampling with the inverse scale enlarges the content by `scale`
  for (auto& row : lin)
    for (auto& v : row) v /= a.scale;
  map.linear = lin;
  map.center = {0.5 * (static_cast<double>(d.d) - 1), 0.5 * (static_cast<double>(d.h) - 1),
                0.5 * (static_cast<double>(d.w) - 1)};
  return map;
}

DisplacementField make_elastic(const Dims& d, const AugmentDraw& a, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kElastic}));
  DisplacementField f;
  f.dims = d;
  for (auto* comp : {&f.dd, &f.dh, &f.dw}) {
    std::vector<double> noise(d.count());
    for (auto& v : noise) v = rng.uniform(-1.0, 1.0);
    gaussian_smooth(noise, d, a.elastic_sigma);
    comp->resize(d.count());
    for (std::size_t i = 0; i < noise.size(); ++i)
      (*comp)[i] = static_cast<float>(a.elastic_magnitude * noise[i]);
  }
  return f;
}

}  // namespace

void AugmentConfig::validate() const {
  for (double p : {p_elastic, p_affine, p_flip})
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorCode::Config, "augmentation probabilities must be in [0, 1]");
  if (!(elastic_magnitude_min >= 0.0 && elastic_magnitude_max >= elastic_magnitude_min))
    fail(ErrorCode::Config, "elastic magnitude range is invalid");
  if (!(elastic_sigma_min > 0.0 && elastic_sigma_max >= elastic_sigma_min))
    fail(ErrorCode::Config, "elastic sigma range is invalid");
  if (!(reference_extent > 0.0)) fail(ErrorCode::Config, "reference extent must be positive");
  if (!(max_rotation_deg >= 0.0) || !(max_scale >= 0.0 && max_scale < 1.0))
    fail(ErrorCode::Config, "affine ranges are invalid");
  if (!(noise_std_max >= 0.0)) fail(ErrorCode::Config, "noise std bound must be >= 0");
}

AugmentDraw draw_augment(const Dims& dims, std::uint64_t seed, const AugmentConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(seed, {kDraws}));
  // Every parameter is drawn on every call so the stream layout is fixed.
  AugmentDraw a;
  a.elastic = rng.bernoulli(cfg.p_elastic);
  a.affine = rng.bernoulli(cfg.p_affine);
  for (auto& f : a.flip) f = rng.bernoulli(cfg.p_flip);
  const double rel = static_cast<double>(dims.min()) / cfg.reference_extent;
  a.elastic_magnitude = rel * rng.uniform(cfg.elastic_magnitude_min, cfg.elastic_magnitude_max);
  a.elastic_sigma = rel * rng.uniform(cfg.elastic_sigma_min, cfg.elastic_sigma_max);
  const double max_rot = cfg.max_rotation_deg * std::numbers::pi / 180.0;
  for (auto& r : a.rotation_rad) r = rng.uniform(-max_rot, max_rot);
  a.scale = 1.0 + rng.uniform(-cfg.max_scale, cfg.max_scale);
  a.noise_std = rng.uniform(0.0, cfg.noise_std_max);
  return a;
}

VolumeGrid flip_axes(const VolumeGrid& v, const std::array<bool, 3>& axes) {
  if (!axes[0] && !axes[1] && !axes[2]) return v;
  const Dims& d = v.dims();
  std::vector<float> out(v.size());
  for (std::size_t a = 0; a < d.d; ++a)
    for (std::size_t b = 0; b < d.h; ++b)
      for (std::size_t c = 0; c < d.w; ++c) {
        const std::size_t sa = axes[0] ? d.d - 1 - a : a;
        const std::size_t sb = axes[1] ? d.h - 1 - b : b;
        const std::size_t sc = axes[2] ? d.w - 1 - c : c;
        out[v.index(a, b, c)] = v.at(sa, sb, sc);
      }
  return VolumeGrid(d, std::move(out), v.modality());
}

std::pair<VolumeGrid, VolumeGrid> augment_pair(const VolumeGrid& x, const VolumeGrid& y,
                                               std::uint64_t seed, const AugmentConfig& cfg,
                                               AugmentDraw* record) {
  if (!(x.dims() == y.dims())) fail(ErrorCode::ShapeMismatch, "augment_pair needs equally sized volumes");
  const Dims& d = x.dims();
  const AugmentDraw a = draw_augment(d, seed, cfg);
  if (record) *record = a;

  VolumeGrid gx = x, gy = y;
  if (a.elastic || a.affine) {
    Warp warp;
    if (a.elastic && a.affine) {
      warp = CompositeWarp{make_affine(d, a), make_elastic(d, a, seed)};
    } else if (a.affine) {
      warp = make_affine(d, a);
    } else {
      warp = make_elastic(d, a, seed);
    }
    gx = resample_trilinear(gx, warp);
    gy = resample_trilinear(gy, warp);
  }
  gx = flip_axes(gx, a.flip);
  gy = flip_axes(gy, a.flip);

  Rng noise(derive_seed(seed, {kNoise}));
  std::vector<float> nx(gx.data().begin(), gx.data().end());
  for (auto& v : nx) v = static_cast<float>(v + a.noise_std * noise.normal());
  return {VolumeGrid(d, std::move(nx), x.modality()), std::move(gy)};
}

}  // namespace cycpl::trainkit
