#include <cmath>
#include <fstream>
#include <limits>

#include "cycpl/volgrid.hpp"
#include "test_util.hpp"

using namespace cycpl;
using testutil::error_code_of;
using testutil::random_volume;

TEST_CASE("vvol round trip is bit exact") {
  const auto dir = testutil::scratch_dir("vvol");
  const auto v = random_volume({4, 5, 6}, 1);
  write_vvol(v, dir / "a.vvol");
  CHECK(read_vvol(dir / "a.vvol").bit_equal(v));
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(s);
    const Dims d{1 + rng.below(6), 1 + rng.below(6), 1 + rng.below(6)};
    const auto r = random_volume(d, 1000 + s, -1e6, 1e6);
    CHECK(decode_vvol(encode_vvol(r)).bit_equal(r));
  }
}

TEST_CASE("vvol byte layout") {
  const VolumeGrid v({1, 1, 2}, {0.0f, 1.0f});
  const auto bytes = encode_vvol(v);
  REQUIRE(bytes.size() == 28);
  const unsigned char expected[28] = {'V', 'V', 'O', 'L', 'v', '0', '0', '1', 1, 0, 0, 0, 1, 0,
                                      0,   0,   2,   0,   0,   0,   0,   0,   0, 0, 0, 0, 0x80, 0x3f};
  CHECK(std::equal(bytes.begin(), bytes.end(), expected));
  const auto back = decode_vvol(std::span<const unsigned char>(expected, 28));
  CHECK(back.at(0, 0, 0) == 0.0f);
  CHECK(back.at(0, 0, 1) == 1.0f);
  CHECK(encode_vvol(v) == bytes);
}

TEST_CASE("vvol errors") {
  std::vector<unsigned char> bad(28, 'X');
  CHECK(error_code_of([&] { decode_vvol(bad); }) == ErrorCode::BadMagic);
  auto bytes = encode_vvol(VolumeGrid({1, 1, 2}, {0.0f, 1.0f}));
  bytes.pop_back();
  CHECK(error_code_of([&] { decode_vvol(bytes); }) == ErrorCode::TruncatedFile);
  auto nan_bytes = encode_vvol(VolumeGrid({1, 1, 1}, {0.0f}));
  nan_bytes[20] = 0x00, nan_bytes[21] = 0x00, nan_bytes[22] = 0xc0, nan_bytes[23] = 0x7f;
  CHECK(error_code_of([&] { decode_vvol(nan_bytes); }) == ErrorCode::NonFinite);
  CHECK(error_code_of([] {
          VolumeGrid({1, 1, 1}, {std::numeric_limits<float>::quiet_NaN()});
        }) == ErrorCode::NonFinite);
  CHECK(error_code_of([] { VolumeGrid({1, 1, 2}, {0.0f}); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("slicing shapes, index mapping and restack") {
  const auto v = random_volume({2, 3, 4}, 2);
  const auto ax = extract_slices(v, Plane::Axial);
  REQUIRE(ax.size() == 2);
  CHECK(ax[0].rows == 3);
  CHECK(ax[0].cols == 4);
  const auto big = random_volume({4, 5, 6}, 3);
  CHECK(big.at(1, 2, 3) == extract_slice(big, Plane::Sagittal, 3).at(1, 2));
  CHECK(big.at(1, 2, 3) == extract_slice(big, Plane::Coronal, 2).at(1, 3));
  CHECK(big.at(1, 2, 3) == extract_slice(big, Plane::Axial, 1).at(2, 3));
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng(s);
    const Dims d{1 + rng.below(8), 1 + rng.below(8), 1 + rng.below(8)};
    const auto r = random_volume(d, 50 + s);
    for (Plane p : kAllPlanes) {
      const auto slices = extract_slices(r, p);
      CHECK(slices.size() == d.extent(p));
      CHECK(restack(slices).bit_equal(r));
    }
  }
}

TEST_CASE("normalize_slice") {
  Slice2D c{2, 2, {5, 5, 5, 5}};
  for (float x : normalize_slice(c, 1e-6).data) CHECK(x == 0.0f);
  Slice2D r{1, 3, {0, 2, 4}};
  const auto n = normalize_slice(r, 1e-12);
  CHECK(n.data[0] == 0.0f);
  CHECK(n.data[1] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(n.data[2] == doctest::Approx(1.0).epsilon(1e-6));
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto v = random_volume({3, 6, 7}, 80 + s, -5, 5);
    const auto sl = extract_slice(v, Plane::Axial, 1);
    const auto once = normalize_slice(sl, 1e-6);
    const auto twice = normalize_slice(once, 1e-6);
    CHECK(*std::min_element(once.data.begin(), once.data.end()) == 0.0f);
    for (std::size_t i = 0; i < once.data.size(); ++i) {
      CHECK(once.data[i] < 1.0f);
      CHECK(std::abs(once.data[i] - twice.data[i]) <= 2e-6 + 1e-7);
    }
  }
}

TEST_CASE("trilinear resampling") {
  const auto v = random_volume({5, 6, 7}, 4);
  const auto same = resample_trilinear(v, AffineMap{});
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(same.data()[i] - v.data()[i]) <= 1e-6);

  std::vector<float> ramp(4 * 4 * 4);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<float>(i % 4 + 1);
  const VolumeGrid rv({4, 4, 4}, ramp);
  AffineMap shift;
  shift.offset = {0, 0, -1};  // output(w) = input(w - 1)
  const auto shifted = resample_trilinear(rv, shift);
  for (std::size_t d = 0; d < 4; ++d)
    for (std::size_t h = 0; h < 4; ++h) {
      CHECK(shifted.at(d, h, 0) == 0.0f);
      for (std::size_t w = 1; w < 4; ++w) CHECK(shifted.at(d, h, w) == rv.at(d, h, w - 1));
    }

  const VolumeGrid two({1, 1, 2}, {0.0f, 2.0f});
  CHECK(sample_trilinear(two, 0, 0, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("scaled slice range") {
  CHECK(scaled_slice_range(128) == std::pair<std::size_t, std::size_t>{20, 90});
  CHECK(scaled_slice_range(32) == std::pair<std::size_t, std::size_t>{5, 22});
  CHECK(scaled_slice_range(16) == std::pair<std::size_t, std::size_t>{2, 11});
}
