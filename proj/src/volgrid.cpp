#include "cycpl/volgrid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cycpl/error.hpp"

namespace cycpl {

namespace {

constexpr char kVvolMagic[8] = {'V', 'V', 'O', 'L', 'v', '0', '0', '1'};
constexpr std::size_t kVvolHeader = 8 + 3 * 4;

void store_u32(unsigned char* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

bool all_finite(std::span<const float> xs) {
  return std::all_of(xs.begin(), xs.end(), [](float x) { return std::isfinite(x); });
}

}  // namespace

std::string_view to_string(Plane p) {
  switch (p) {
    case Plane::Axial: return "axial";
    case Plane::Coronal: return "coronal";
    case Plane::Sagittal: return "sagittal";
  }
  return "?";
}

Plane parse_plane(std::string_view s) {
  if (s == "axial") return Plane::Axial;
  if (s == "coronal") return Plane::Coronal;
  if (s == "sagittal") return Plane::Sagittal;
  fail(ErrorCode::Config, "unknown plane '" + std::string(s) + "'");
}

std::size_t Dims::min() const { return std::min({d, h, w}); }

std::size_t Dims::extent(Plane p) const {
  switch (p) {
    case Plane::Axial: return d;
    case Plane::Coronal: return h;
    case Plane::Sagittal: return w;
  }
  return 0;
}

VolumeGrid::VolumeGrid(Dims dims, std::vector<float> data, Modality modality)
    : dims_(dims), data_(std::move(data)), modality_(modality) {
  if (dims_.d == 0 || dims_.h == 0 || dims_.w == 0)
    fail(ErrorCode::ShapeMismatch, "volume dims must be positive");
  if (data_.size() != dims_.count())
    fail(ErrorCode::ShapeMismatch, "volume payload length " + std::to_string(data_.size()) +
                                       " != D*H*W = " + std::to_string(dims_.count()));
  if (!all_finite(data_)) fail(ErrorCode::NonFinite, "volume contains NaN or Inf");
}

VolumeGrid VolumeGrid::filled(Dims dims, float value, Modality modality) {
  return VolumeGrid(dims, std::vector<float>(dims.count(), value), modality);
}

float VolumeGrid::min() const { return *std::min_element(data_.begin(), data_.end()); }
float VolumeGrid::max() const { return *std::max_element(data_.begin(), data_.end()); }

bool VolumeGrid::bit_equal(const VolumeGrid& other) const {
  return dims_ == other.dims_ && modality_ == other.modality_ &&
         data_.size() == other.data_.size() &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

std::vector<unsigned char> encode_vvol(const VolumeGrid& v) {
  if (!all_finite(v.data())) fail(ErrorCode::NonFinite, "refusing to encode non-finite volume");
  std::vector<unsigned char> out(kVvolHeader + v.size() * 4);
  std::memcpy(out.data(), kVvolMagic, 8);
  unsigned char* p = out.data() + 8;
  for (std::uint32_t u : {static_cast<std::uint32_t>(v.dims().d), static_cast<std::uint32_t>(v.dims().h),
                          static_cast<std::uint32_t>(v.dims().w)}) {
    store_u32(p, u);
    p += 4;
  }
  for (float f : v.data()) {
    store_u32(p, std::bit_cast<std::uint32_t>(f));
    p += 4;
  }
  return out;
}

VolumeGrid decode_vvol(std::span<const unsigned char> bytes, Modality modality) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kVvolMagic, 8) != 0)
    fail(ErrorCode::BadMagic, "missing VVOLv001 header");
  if (bytes.size() < kVvolHeader) fail(ErrorCode::TruncatedFile, "VVOL header is incomplete");
  const Dims dims{get_u32(bytes.data() + 8), get_u32(bytes.data() + 12),
                  get_u32(bytes.data() + 16)};
  const std::size_t n = dims.count();
  if (bytes.size() - kVvolHeader < n * 4)
    fail(ErrorCode::TruncatedFile, "VVOL payload shorter than D*H*W*4 bytes");
  std::vector<float> data(n);
  const unsigned char* p = bytes.data() + kVvolHeader;
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  if (!all_finite(data)) fail(ErrorCode::NonFinite, "VVOL payload contains NaN or Inf");
  return VolumeGrid(dims, std::move(data), modality);
}

VolumeGrid read_vvol(const std::filesystem::path& path, Modality modality) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_vvol(bytes, modality);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_vvol(const VolumeGrid& v, const std::filesystem::path& path) {
  const auto bytes = encode_vvol(v);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

Slice2D extract_slice(const VolumeGrid& v, Plane plane, std::size_t index) {
  const Dims& dm = v.dims();
  Slice2D s;
  s.plane = plane;
  s.index = index;
  switch (plane) {
    case Plane::Axial:
      s.rows = dm.h;
      s.cols = dm.w;
      s.data.assign(v.data().begin() + static_cast<std::ptrdiff_t>(index * dm.h * dm.w),
                    v.data().begin() + static_cast<std::ptrdiff_t>((index + 1) * dm.h * dm.w));
      break;
    case Plane::Coronal:
      s.rows = dm.d;
      s.cols = dm.w;
      s.data.resize(s.rows * s.cols);
      for (std::size_t d = 0; d < dm.d; ++d)
        for (std::size_t w = 0; w < dm.w; ++w) s.data[d * dm.w + w] = v.at(d, index, w);
      break;
    case Plane::Sagittal:
      s.rows = dm.d;
      s.cols = dm.h;
      s.data.resize(s.rows * s.cols);
      for (std::size_t d = 0; d < dm.d; ++d)
        for (std::size_t h = 0; h < dm.h; ++h) s.data[d * dm.h + h] = v.at(d, h, index);
      break;
  }
  return s;
}

std::vector<Slice2D> extract_slices(const VolumeGrid& v, Plane plane) {
  std::vector<Slice2D> out;
  const std::size_t n = v.dims().extent(plane);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(extract_slice(v, plane, i));
  return out;
}

VolumeGrid restack(std::span<const Slice2D> slices, Modality modality) {
  if (slices.empty()) fail(ErrorCode::ShapeMismatch, "restack needs at least one slice");
  const Plane plane = slices.front().plane;
  const std::size_t n = slices.size(), rows = slices.front().rows, cols = slices.front().cols;
  Dims dims;
  switch (plane) {
    case Plane::Axial: dims = {n, rows, cols}; break;
    case Plane::Coronal: dims = {rows, n, cols}; break;
    case Plane::Sagittal: dims = {rows, cols, n}; break;
  }
  std::vector<float> data(dims.count());
  for (std::size_t i = 0; i < n; ++i) {
    const Slice2D& s = slices[i];
    if (s.plane != plane || s.rows != rows || s.cols != cols || s.index != i)
      fail(ErrorCode::ShapeMismatch, "inconsistent slice stack");
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        std::size_t d = 0, h = 0, w = 0;
        switch (plane) {
          case Plane::Axial: d = i, h = r, w = c; break;
          case Plane::Coronal: d = r, h = i, w = c; break;
          case Plane::Sagittal: d = r, h = c, w = i; break;
        }
        data[(d * dims.h + h) * dims.w + w] = s.at(r, c);
      }
    }
  }
  return VolumeGrid(dims, std::move(data), modality);
}

Slice2D normalize_slice(const Slice2D& u, double eps_mm) {
  if (!(eps_mm > 0)) fail(ErrorCode::InvalidAttribute, "eps_mm must be positive");
  Slice2D out = u;
  if (u.data.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(u.data.begin(), u.data.end());
  const double lo = *lo_it;
  const double denom = static_cast<double>(*hi_it) - lo + eps_mm;
  for (std::size_t i = 0; i < u.data.size(); ++i)
    out.data[i] = static_cast<float>((u.data[i] - lo) / denom);
  return out;
}

std::array<double, 3> AffineMap::apply(double d, double h, double w) const {
  const double p[3] = {d - center[0], h - center[1], w - center[2]};
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i)
    out[i] = linear[i][0] * p[0] + linear[i][1] * p[1] + linear[i][2] * p[2] + center[i] + offset[i];
  return out;
}

double sample_trilinear(const VolumeGrid& v, double d, double h, double w) {
  const Dims& dm = v.dims();
  const double fd = std::floor(d), fh = std::floor(h), fw = std::floor(w);
  const double td = d - fd, th = h - fh, tw = w - fw;
  const auto d0 = static_cast<long long>(fd), h0 = static_cast<long long>(fh),
             w0 = static_cast<long long>(fw);
  double acc = 0.0;
  for (int a = 0; a < 2; ++a) {
    const long long dd = d0 + a;
    if (dd < 0 || dd >= static_cast<long long>(dm.d)) continue;
    const double wa = a ? td : 1.0 - td;
    if (wa == 0.0) continue;
    for (int b = 0; b < 2; ++b) {
      const long long hh = h0 + b;
      if (hh < 0 || hh >= static_cast<long long>(dm.h)) continue;
      const double wb = b ? th : 1.0 - th;
      if (wb == 0.0) continue;
      for (int c = 0; c < 2; ++c) {
        const long long ww = w0 + c;
        if (ww < 0 || ww >= static_cast<long long>(dm.w)) continue;
        const double wc = c ? tw : 1.0 - tw;
        if (wc == 0.0) continue;
        acc += wa * wb * wc * v.at(static_cast<std::size_t>(dd), static_cast<std::size_t>(hh),
                                    static_cast<std::size_t>(ww));
      }
    }
  }
  return acc;
}

VolumeGrid resample_trilinear(const VolumeGrid& v, const Warp& warp) {
  const Dims& dm = v.dims();
  const auto check_field = [&](const DisplacementField& f) {
    if (!(f.dims == dm) || f.dd.size() != dm.count() || f.dh.size() != dm.count() ||
        f.dw.size() != dm.count())
      fail(ErrorCode::ShapeMismatch, "displacement field does not match volume dims");
  };
  if (const auto* f = std::get_if<DisplacementField>(&warp)) check_field(*f);
  if (const auto* c = std::get_if<CompositeWarp>(&warp)) {
    if (!c->displacement.dd.empty()) check_field(c->displacement);
  }

  std::vector<float> out(dm.count());
  std::size_t i = 0;
  for (std::size_t d = 0; d < dm.d; ++d) {
    for (std::size_t h = 0; h < dm.h; ++h) {
      for (std::size_t w = 0; w < dm.w; ++w, ++i) {
        std::array<double, 3> src{};
        if (const auto* a = std::get_if<AffineMap>(&warp)) {
          src = a->apply(double(d), double(h), double(w));
        } else if (const auto* f = std::get_if<DisplacementField>(&warp)) {
          src = {d + double(f->dd[i]), h + double(f->dh[i]), w + double(f->dw[i])};
        } else {
          const auto& c = std::get<CompositeWarp>(warp);
          src = c.affine.apply(double(d), double(h), double(w));
          if (!c.displacement.dd.empty()) {
            src[0] += c.displacement.dd[i];
            src[1] += c.displacement.dh[i];
            src[2] += c.displacement.dw[i];
          }
        }
        out[i] = static_cast<float>(sample_trilinear(v, src[0], src[1], src[2]));
      }
    }
  }
  return VolumeGrid(dm, std::move(out), v.modality());
}

std::pair<std::size_t, std::size_t> scaled_slice_range(std::size_t extent) {
  if (extent < 8) fail(ErrorCode::RangeEmpty, "slice window needs an extent of at least 8");
  const std::size_t lo = extent * 20 / 128;
  const std::size_t hi = extent * 90 / 128;
  if (hi < lo) fail(ErrorCode::RangeEmpty, "empty slice window");
  return {lo, hi};
}

}  // namespace cycpl
