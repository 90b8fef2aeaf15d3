#include "cycpl/percloss.hpp"

#include <algorithm>
#include <cmath>

#include "cycpl/autodiff/ops.hpp"
#include "cycpl/error.hpp"

namespace cycpl::perc {

std::size_t next_duration(std::size_t t, double gamma) {
  const double r = std::round(gamma * static_cast<double>(t));
  return r < 1.0 ? 1 : static_cast<std::size_t>(r);
}

PlaneSchedule::PlaneSchedule(std::size_t t0, double gamma) : t0_(t0), gamma_(gamma) {
  if (t0 < 1) fail(ErrorCode::InvalidAttribute, "schedule T0 must be >= 1");
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    fail(ErrorCode::InvalidAttribute, "schedule gamma must be positive and finite");
  durations_.push_back(t0);
  starts_.push_back(0);
}

void PlaneSchedule::extend(std::size_t k) const {
  while (durations_.size() <= k) {
    starts_.push_back(starts_.back() + 3 * durations_.back());
    durations_.push_back(next_duration(durations_.back(), gamma_));
  }
}

std::size_t PlaneSchedule::duration(std::size_t k) const {
  extend(k);
  return durations_[k];
}

std::size_t PlaneSchedule::cycle_start(std::size_t k) const {
  extend(k);
  return starts_[k];
}

std::size_t PlaneSchedule::cycle_of(std::size_t epoch) const {
  while (starts_.back() + 3 * durations_.back() <= epoch) extend(durations_.size());
  const auto it = std::upper_bound(starts_.begin(), starts_.end(), epoch);
  return static_cast<std::size_t>(it - starts_.begin()) - 1;
}

Plane PlaneSchedule::active_plane(std::size_t epoch) const {
  const std::size_t k = cycle_of(epoch);
  const std::size_t q = (epoch - starts_[k]) / durations_[k];
  return static_cast<Plane>(q);
}

void PercConfig::validate() const {
  if (!(eps_mm > 0.0)) fail(ErrorCode::InvalidAttribute, "eps_mm must be positive");
  if (extractor_2d && extractor_2d->spatial_dims() != 2)
    fail(ErrorCode::InvalidAttribute, "extractor_2d must be two-dimensional");
  if (extractor_3d && extractor_3d->spatial_dims() != 3)
    fail(ErrorCode::InvalidAttribute, "extractor_3d must be three-dimensional");
}

PercConfig default_perc_config() {
  PercConfig cfg;
  cfg.extractor_2d = std::make_shared<const nets::FeatureExtractor>(nets::default_extractor(2));
  cfg.extractor_3d = std::make_shared<const nets::FeatureExtractor>(nets::default_extractor(3));
  return cfg;
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

template <typename T>
ad::Tensor<T> feature_mse(const ad::Tensor<T>& a, const ad::Tensor<T>& b) {
  return ad::mean(ad::square(ad::sub(a, b)));
}

}  // namespace

template <typename T>
ad::Tensor<T> slice_batch(const ad::Tensor<T>& v, Plane plane) {
  const std::size_t n = v.dim(0), d = v.dim(2), h = v.dim(3), w = v.dim(4);
  const ad::Tensor<T> flat = ad::reshape(v, {n, d, h, w});
  switch (plane) {
    case Plane::Axial:
      return ad::reshape(flat, {n * d, 1, h, w});
    case Plane::Coronal:
      return ad::reshape(ad::permute(flat, {0, 2, 1, 3}), {n * h, 1, d, w});
    case Plane::Sagittal:
      return ad::reshape(ad::permute(flat, {0, 3, 1, 2}), {n * w, 1, d, h});
  }
  fail(ErrorCode::InvalidAttribute, "unknown plane");
}

template <typename T>
ad::Tensor<T> plane_perc_loss(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, Plane plane,
                              const PercConfig& cfg) {
  check_pair(yhat, y);
  cfg.validate();
  if (!cfg.extractor_2d) fail(ErrorCode::InvalidAttribute, "no 2D extractor configured");
  const auto norm = [&](const ad::Tensor<T>& v) {
    return ad::minmax_normalize(slice_batch(v, plane), cfg.eps_mm, 1, cfg.detach_minmax);
  };
  return feature_mse(cfg.extractor_2d->extract(norm(yhat)), cfg.extractor_2d->extract(norm(y)));
}

template <typename T>
ad::Tensor<T> perc_2d(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, const PercConfig& cfg) {
  return plane_perc_loss(yhat, y, cfg.baseline_plane, cfg);
}

template <typename T>
ad::Tensor<T> perc_3d(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, const PercConfig& cfg) {
  check_pair(yhat, y);
  cfg.validate();
  if (!cfg.extractor_3d) fail(ErrorCode::InvalidAttribute, "no 3D extractor configured");
  const auto norm = [&](const ad::Tensor<T>& v) {
    return ad::minmax_normalize(v, cfg.eps_mm, 1, cfg.detach_minmax);
  };
  return feature_mse(cfg.extractor_3d->extract(norm(yhat)), cfg.extractor_3d->extract(norm(y)));
}

template <typename T>
ad::Tensor<T> perc_25d(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, const PercConfig& cfg) {
  const auto ax = plane_perc_loss(yhat, y, Plane::Axial, cfg);
  const auto co = plane_perc_loss(yhat, y, Plane::Coronal, cfg);
  const auto sa = plane_perc_loss(yhat, y, Plane::Sagittal, cfg);
  return ad::add(ad::add(ax, co), sa);
}

template <typename T>
ad::Tensor<T> cyclic_25d(const ad::Tensor<T>& yhat, const ad::Tensor<T>& y, std::size_t epoch,
                         const PlaneSchedule& sched, const PercConfig& cfg) {
  return plane_perc_loss(yhat, y, sched.active_plane(epoch), cfg);
}

#define CYCPL_PERC_INSTANTIATE(T)                                                             \
  template ad::Tensor<T> slice_batch(const ad::Tensor<T>&, Plane);                            \
  template ad::Tensor<T> plane_perc_loss(const ad::Tensor<T>&, const ad::Tensor<T>&, Plane,   \
                                         const PercConfig&);                                  \
  template ad::Tensor<T> perc_2d(const ad::Tensor<T>&, const ad::Tensor<T>&,                  \
                                 const PercConfig&);                                          \
  template ad::Tensor<T> perc_3d(const ad::Tensor<T>&, const ad::Tensor<T>&,                  \
                                 const PercConfig&);                                          \
  template ad::Tensor<T> perc_25d(const ad::Tensor<T>&, const ad::Tensor<T>&,                 \
                                  const PercConfig&);                                         \
  template ad::Tensor<T> cyclic_25d(const ad::Tensor<T>&, const ad::Tensor<T>&, std::size_t,  \
                                    const PlaneSchedule&, const PercConfig&);

CYCPL_PERC_INSTANTIATE(float)
CYCPL_PERC_INSTANTIATE(double)

}  // namespace cycpl::perc
