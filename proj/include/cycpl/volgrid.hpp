#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace cycpl {

enum class Modality { MRI, PET };

/// Slicing orientation. Axial fixes the D index, coronal fixes H and
/// sagittal fixes W.
enum class Plane { Axial = 0, Coronal = 1, Sagittal = 2 };

inline constexpr std::array<Plane, 3> kAllPlanes = {Plane::Axial, Plane::Coronal, Plane::Sagittal};

std::string_view to_string(Plane p);
Plane parse_plane(std::string_view s);

struct Dims {
  std::size_t d = 0, h = 0, w = 0;

  std::size_t count() const { return d * h * w; }
  std::size_t min() const;
  /// Number of slices along a plane.
  std::size_t extent(Plane p) const;
  bool operator==(const Dims&) const = default;
};

/// Dense 3D scalar field, row-major with W fastest. Values are finite.
class VolumeGrid {
 public:
  VolumeGrid() = default;
  /// Throws ShapeMismatch on a length mismatch, NonFinite on NaN/Inf.
  VolumeGrid(Dims dims, std::vector<float> data, Modality modality = Modality::PET);
  static VolumeGrid filled(Dims dims, float value, Modality modality = Modality::PET);

  const Dims& dims() const { return dims_; }
  Modality modality() const { return modality_; }
  std::span<const float> data() const { return data_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t d, std::size_t h, std::size_t w) const {
    return (d * dims_.h + h) * dims_.w + w;
  }
  float at(std::size_t d, std::size_t h, std::size_t w) const { return data_[index(d, h, w)]; }

  float min() const;
  float max() const;

  /// Bitwise comparison of dims, modality and payload.
  bool bit_equal(const VolumeGrid& other) const;

 private:
  Dims dims_;
  std::vector<float> data_;
  Modality modality_ = Modality::PET;
};

struct Slice2D {
  std::size_t rows = 0, cols = 0;
  std::vector<float> data;
  Plane plane = Plane::Axial;
  std::size_t index = 0;

  float at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// VVOL: "VVOLv001", u32 LE D,H,W, then D*H*W f32 LE, W fastest.
/// The modality tag is not stored in the file.
VolumeGrid read_vvol(const std::filesystem::path& path, Modality modality = Modality::PET);
void write_vvol(const VolumeGrid& v, const std::filesystem::path& path);
std::vector<unsigned char> encode_vvol(const VolumeGrid& v);
VolumeGrid decode_vvol(std::span<const unsigned char> bytes, Modality modality = Modality::PET);

std::vector<Slice2D> extract_slices(const VolumeGrid& v, Plane plane);
Slice2D extract_slice(const VolumeGrid& v, Plane plane, std::size_t index);
/// Inverse of extract_slices; all slices must share one plane.
VolumeGrid restack(std::span<const Slice2D> slices, Modality modality = Modality::PET);

/// (u - min) / (max - min + eps)
Slice2D normalize_slice(const Slice2D& u, double eps_mm = 1e-6);

/// Maps output voxel coordinates (d, h, w) to source coordinates:
/// src = linear * (p - center) + center + offset.
struct AffineMap {
  std::array<std::array<double, 3>, 3> linear{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  std::array<double, 3> offset{0, 0, 0};
  std::array<double, 3> center{0, 0, 0};

  std::array<double, 3> apply(double d, double h, double w) const;
};

/// Per-voxel displacement in voxel units, src = p + disp(p).
struct DisplacementField {
  Dims dims;
  std::vector<float> dd, dh, dw;
};

/// Displacement composed with an optional affine: src = affine(p) + disp(p).
struct CompositeWarp {
  AffineMap affine;
  DisplacementField displacement;
};

using Warp = std::variant<AffineMap, DisplacementField, CompositeWarp>;

/// Trilinear sample with zero padding outside the grid.
double sample_trilinear(const VolumeGrid& v, double d, double h, double w);
VolumeGrid resample_trilinear(const VolumeGrid& v, const Warp& warp);

/// Inclusive slice window proportional to the 20..90 window of a 128 grid.
std::pair<std::size_t, std::size_t> scaled_slice_range(std::size_t extent);

}  // namespace cycpl
