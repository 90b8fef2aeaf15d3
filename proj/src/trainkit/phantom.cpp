#include "cycpl/trainkit/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cycpl/error.hpp"
#include "cycpl/rng.hpp"

namespace cycpl::trainkit {

void PhantomSpec::validate() const {
  if (n_subjects == 0) fail(ErrorCode::Config, "phantom needs at least one subject");
  if (dims.min() < 4) fail(ErrorCode::Config, "phantom dims must be at least 4");
  if (manufacturers.empty()) fail(ErrorCode::Config, "phantom needs at least one manufacturer");
  double total = 0.0;
  for (const auto& m : manufacturers) {
    if (!(m.weight >= 0.0) || !(m.scale > 0.0) || !std::isfinite(m.bias))
      fail(ErrorCode::Config, "manufacturer '" + m.name + "' needs weight >= 0, scale > 0");
    total += m.weight;
  }
  if (!(total > 0.0)) fail(ErrorCode::Config, "manufacturer weights sum to zero");
  if (!(hotspot_min >= 0.0 && hotspot_max >= hotspot_min))
    fail(ErrorCode::Config, "hotspot intensity range is invalid");
  if (!(hotspot_radius > 0.0) || !(blob_sigma > 0.0))
    fail(ErrorCode::Config, "hotspot radius and blob sigma must be positive");
}

void gaussian_smooth(std::vector<double>& field, const Dims& dims, double sigma) {
  if (!(sigma > 0.0)) return;
  const long r = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double total = 0.0;
  for (long i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    total += k[static_cast<std::size_t>(i + r)];
  }
  for (auto& v : k) v /= total;

  const std::size_t ext[3] = {dims.d, dims.h, dims.w};
  const std::size_t stride[3] = {dims.h * dims.w, dims.w, 1};
  std::vector<double> line;
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t n = ext[axis], st = stride[axis];
    line.resize(n);
    for (std::size_t base = 0; base < field.size(); ++base) {
      // visit each line once, from its first element
      if ((base / st) % n != 0) continue;
      for (std::size_t i = 0; i < n; ++i) line[i] = field[base + i * st];
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (long t = -r; t <= r; ++t) {
          const long j = std::clamp(static_cast<long>(i) + t, 0L, static_cast<long>(n) - 1);
          acc += k[static_cast<std::size_t>(t + r)] * line[static_cast<std::size_t>(j)];
        }
        field[base + i * st] = acc;
      }
    }
  }
}

double pet_response(double mri) {
  return 0.6 + 0.35 * std::tanh(2.5 * mri) + 0.25 * mri * mri;
}

std::vector<PhantomSubject> gen_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Dims& d = spec.dims;
  const double edge = static_cast<double>(d.min());
  double wsum = 0.0;
  for (const auto& m : spec.manufacturers) wsum += m.weight;

  std::vector<PhantomSubject> out;
  for (std::size_t s = 0; s < spec.n_subjects; ++s) {
    Rng rng(derive_seed(spec.seed, {s}));

    double pick = rng.uniform() * wsum;
    const ManufacturerModel* man = &spec.manufacturers.back();
    for (const auto& m : spec.manufacturers) {
      if (pick < m.weight) {
        man = &m;
        break;
      }
      pick -= m.weight;
    }

    std::vector<double> field(d.count());
    for (auto& v : field) v = rng.normal();
    gaussian_smooth(field, d, spec.blob_sigma * edge);
    double ss = 0.0;
    for (double v : field) ss += v * v;
    const double sd = std::sqrt(ss / static_cast<double>(field.size()));
    for (auto& v : field) v = 1.2 * v / (sd > 0 ? sd : 1.0);

    std::vector<double> hot(d.count(), 0.0);
    const double sig = spec.hotspot_radius * edge;
    for (std::size_t k = 0; k < spec.hotspot_count; ++k) {
      const double cd = rng.uniform(0.2, 0.8) * static_cast<double>(d.d);
      const double ch = rng.uniform(0.2, 0.8) * static_cast<double>(d.h);
      const double cw = rng.uniform(0.2, 0.8) * static_cast<double>(d.w);
      const double amp = rng.uniform(spec.hotspot_min, spec.hotspot_max);
      for (std::size_t a = 0; a < d.d; ++a)
        for (std::size_t b = 0; b < d.h; ++b)
          for (std::size_t c = 0; c < d.w; ++c) {
            const double r2 = (a - cd) * (a - cd) + (b - ch) * (b - ch) + (c - cw) * (c - cw);
            hot[(a * d.h + b) * d.w + c] += amp * std::exp(-0.5 * r2 / (sig * sig));
          }
    }

    std::vector<float> mri(d.count()), pet(d.count());
    for (std::size_t i = 0; i < d.count(); ++i) {
      const double m = std::tanh(field[i] - spec.mri_imprint * hot[i]);
      mri[i] = static_cast<float>(m);
      pet[i] = static_cast<float>(man->scale * (pet_response(m) + hot[i]) + man->bias);
    }
    char id[32];
    std::snprintf(id, sizeof id, "sub-%04zu", s);
    out.push_back({id, VolumeGrid(d, std::move(mri), Modality::MRI),
                   VolumeGrid(d, std::move(pet), Modality::PET), man->name});
  }
  return out;
}

}  // namespace cycpl::trainkit
