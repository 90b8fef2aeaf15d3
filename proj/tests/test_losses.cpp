#include <cmath>

#include "cycpl/autodiff/gradcheck.hpp"
#include "cycpl/autodiff/ops.hpp"
#include "cycpl/losses.hpp"
#include "cycpl/volume_tensor.hpp"
#include "test_util.hpp"

using namespace cycpl;
using namespace cycpl::losses;
using testutil::error_code_of;
using TD = ad::Tensor<double>;

namespace {

TD vol(Dims d, std::uint64_t seed) { return to_tensor<double>(testutil::random_volume(d, seed)); }
TD constant(Dims d, double c) { return to_tensor<double>(VolumeGrid::filled(d, static_cast<float>(c))); }

}  // namespace

TEST_CASE("ssim identities and hand value") {
  const SsimConfig cfg;
  const auto v = vol({12, 12, 12}, 1);
  CHECK(std::abs(ssim(v, v, cfg).item() - 1.0) <= 1e-9);
  CHECK(std::abs(ssim_loss(v, v, cfg).item()) <= 1e-9);

  SsimConfig fixed;
  fixed.range_mode = RangeMode::Fixed;
  fixed.fixed_range = 1.0;
  const double s = ssim(constant({12, 12, 12}, 0.5), constant({12, 12, 12}, 0.7), fixed).item();
  // The volumes store float samples, so the closed form uses the rounded values.
  const double lo = static_cast<double>(0.5f), hi = static_cast<double>(0.7f);
  CHECK(std::abs(s - (2 * lo * hi + 1e-4) / (lo * lo + hi * hi + 1e-4)) <= 1e-9);
  CHECK(std::abs(s - 0.94595) <= 1e-4);
  CHECK(std::abs(ssim_loss(constant({12, 12, 12}, 0.5), constant({12, 12, 12}, 0.7), fixed).item() - 0.05405) <= 1e-4);

  const auto a = vol({9, 9, 9}, 2), b = vol({9, 9, 9}, 3);
  CHECK(std::abs(ssim(a, b, fixed).item() - ssim(b, a, fixed).item()) <= 1e-12);
}

TEST_CASE("ssim decreases with noise amplitude") {
  const SsimConfig cfg;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto base = testutil::random_volume({16, 16, 16}, 100 + seed);
    Rng rng(200 + seed);
    std::vector<double> noise(base.size());
    for (auto& n : noise) n = rng.normal();
    double prev = 1.0 + 1e-12;
    for (double amp : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8}) {
      std::vector<float> noisy(base.size());
      for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] = static_cast<float>(base.data()[i] + amp * noise[i]);
      const double s = ssim_value(VolumeGrid(base.dims(), noisy), base, cfg);
      CHECK(s < prev);
      CHECK(s <= 1.0);
      prev = s;
    }
  }
}

TEST_CASE("ssim window rules") {
  SsimConfig cfg;
  CHECK(cfg.effective_window(32) == 11);
  CHECK(cfg.effective_window(8) == 7);
  CHECK(cfg.effective_window(6) == 5);
  CHECK(error_code_of([&] { ssim(vol({2, 8, 8}, 1), vol({2, 8, 8}, 2), cfg); }) == ErrorCode::WindowTooLarge);
  CHECK(error_code_of([&] { ssim(vol({4, 4, 4}, 1), vol({4, 4, 5}, 2), cfg); }) == ErrorCode::ShapeMismatch);
  cfg.window_size = 4;
  CHECK(error_code_of([&] { cfg.validate(); }) == ErrorCode::InvalidAttribute);
  const auto w = gaussian_window(11, 1.5);
  double s = 0;
  for (double x : w) s += x;
  CHECK(s == doctest::Approx(1.0));
  CHECK(w[5] > w[4]);
  CHECK(w[0] == doctest::Approx(w[10]));
}

TEST_CASE("voxel mse") {
  const auto a = testutil::random_volume({4, 4, 4}, 5), b = testutil::random_volume({4, 4, 4}, 6);
  double acc = 0;
  for (std::size_t d = 0; d < 4; ++d)
    for (std::size_t h = 0; h < 4; ++h)
      for (std::size_t w = 0; w < 4; ++w) acc += std::pow(double(a.at(d, h, w)) - b.at(d, h, w), 2);
  CHECK(std::abs(voxel_mse(to_tensor<double>(a), to_tensor<double>(b)).item() - acc / 64) <= 1e-7);
  const auto v = vol({4, 4, 4}, 7);
  CHECK(voxel_mse(v, v).item() == 0.0);
  CHECK(voxel_mse(ad::add_scalar(v, 0.5), v).item() == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("combined loss composition") {
  const auto pc = perc::default_perc_config();
  SsimConfig sc;
  sc.window_size = 3;
  const auto a = vol({6, 6, 6}, 8), b = vol({6, 6, 6}, 9);
  CombinedLossConfig cfg;
  cfg.lambda = 0.0;
  CHECK(combined_loss(a, b, 3, cfg, pc, sc).item() ==
        ad::add(voxel_mse(a, b), ssim_loss(a, b, sc)).item());

  for (auto mode : {PercMode::Cyclic25d, PercMode::D2, PercMode::D3, PercMode::D25, PercMode::None}) {
    CombinedLossConfig c;
    c.perc_mode = mode;
    for (std::size_t e : {0u, 200u, 500u}) {
      const double same = combined_loss(a, a, e, c, pc, sc).item();
      CHECK(std::abs(same) <= 1e-9);
    }
    CHECK(combined_loss(a, b, 0, c, pc, sc).item() > 0.0);
  }

  CombinedLossConfig cyc;
  auto axial = pc;
  axial.baseline_plane = Plane::Axial;
  CombinedLossConfig d2;
  d2.perc_mode = PercMode::D2;
  CHECK(combined_loss(a, b, 0, cyc, axial, sc).item() == combined_loss(a, b, 0, d2, axial, sc).item());

  const auto terms = combined_loss_terms(a, b, 0, cyc, pc, sc);
  CHECK(terms.total.item() ==
        doctest::Approx(terms.voxel.item() + terms.ssim.item() + 0.5 * terms.perc.item()).epsilon(1e-12));

  CHECK(parse_perc_mode("cyclic25d") == PercMode::Cyclic25d);
  CHECK(to_string(PercMode::D25) == "25d");
  CHECK(error_code_of([] { parse_perc_mode("bogus"); }) == ErrorCode::Config);
  cfg.lambda = -1;
  CHECK(error_code_of([&] { cfg.validate(); }) == ErrorCode::InvalidAttribute);
}

TEST_CASE("ssim and combined loss gradients at 6^3") {
  auto pc = perc::default_perc_config();
  pc.detach_minmax = false;
  SsimConfig sc;
  sc.window_size = 3;
  // Inputs on the scale of standardized PET (a few units either side of 0).
  // SSIM is invariant to a common rescale and the perceptual term normalizes,
  // so this keeps the finite-difference step small relative to the data.
  ad::GradCheckOptions opt;
  opt.distinct_spacing = 0.05;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto y = to_tensor<double>(testutil::random_volume({6, 6, 6}, 40 + seed, -5.0, 5.0));
    const auto r = ad::check_gradients_detailed([&](std::span<const TD> xs) { return ssim_loss(xs[0], y, sc); },
                              {{1, 1, 6, 6, 6}}, seed, opt);
    INFO("ssim worst [", r.worst_index, "] analytic ", r.analytic, " numeric ", r.numeric);
    CHECK(r.max_rel_error < 1e-4);
    for (auto mode : {PercMode::Cyclic25d, PercMode::D2, PercMode::D3, PercMode::D25}) {
      CombinedLossConfig c;
      c.perc_mode = mode;
      c.schedule = perc::PlaneSchedule(1, 1.0);
      CHECK(ad::check_gradients(
                [&](std::span<const TD> xs) { return combined_loss(xs[0], y, seed, c, pc, sc); },
                {{1, 1, 6, 6, 6}}, seed, opt) < 1e-4);
    }
  }
}
