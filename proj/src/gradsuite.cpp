#include "cycpl/gradsuite.hpp"

#include <functional>

#include "cycpl/autodiff/gradcheck.hpp"
#include "cycpl/autodiff/ops.hpp"
#include "cycpl/losses.hpp"
#include "cycpl/percloss.hpp"
#include "cycpl/rng.hpp"

namespace cycpl {

namespace {

using ad::GraphBuilder;
using ad::GradCheckOptions;
using ad::Shape;
using TD = ad::Tensor<double>;

struct Case {
  std::string name;
  // Builds the loss for one seed (targets may depend on it).
  std::function<GraphBuilder(std::uint64_t)> build;
  std::vector<Shape> shapes;
  GradCheckOptions opt;
};

// Weighted sum keeps every output element's gradient distinct.
TD wsum(const TD& t) {
  std::vector<double> w(t.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
  return ad::sum(ad::mul(t, ad::reshape(TD::constant({w.size()}, w), t.shape())));
}

Case prim(std::string name, GraphBuilder b, std::vector<Shape> shapes, GradCheckOptions opt = {}) {
  return {std::move(name), [b = std::move(b)](std::uint64_t) { return b; }, std::move(shapes),
          std::move(opt)};
}

std::vector<Case> primitive_cases() {
  using namespace ad;
  GradCheckOptions kink;
  kink.kink_margin = 1e-2;
  GradCheckOptions distinct;
  distinct.distinct_spacing = 0.05;
  return {
      prim("add", [](auto xs) { return wsum(add(xs[0], xs[1])); }, {{2, 3}, {2, 3}}),
      prim("sub", [](auto xs) { return wsum(sub(xs[0], xs[1])); }, {{2, 3}, {2, 3}}),
      prim("mul", [](auto xs) { return wsum(mul(xs[0], xs[1])); }, {{2, 3}, {2, 3}}),
      prim("div", [](auto xs) { return wsum(div(xs[0], add_scalar(square(xs[1]), 1.0))); },
           {{2, 3}, {2, 3}}),
      prim("scalar_mul", [](auto xs) { return wsum(scalar_mul(xs[0], -1.7)); }, {{4}}),
      prim("add_scalar", [](auto xs) { return wsum(square(add_scalar(xs[0], 0.4))); }, {{4}}),
      prim("matmul", [](auto xs) { return wsum(matmul(xs[0], xs[1])); }, {{2, 3}, {3, 4}}),
      prim("conv2d", [](auto xs) { return wsum(conv2d(xs[0], xs[1], xs[2], 1, 1)); },
           {{2, 2, 5, 5}, {3, 2, 3, 3}, {3}}),
      prim("conv2d_stride", [](auto xs) { return wsum(conv2d(xs[0], xs[1], TD(), 2, 0)); },
           {{1, 2, 5, 5}, {2, 2, 3, 3}}),
      prim("conv3d",
           [](auto xs) { return wsum(conv3d(xs[0], xs[1], xs[2], {1, 1, 1}, {1, 1, 1})); },
           {{1, 2, 4, 4, 4}, {2, 2, 3, 3, 3}, {2}}),
      prim("conv3d_pointwise", [](auto xs) { return wsum(conv3d(xs[0], xs[1], xs[2])); },
           {{2, 3, 2, 3, 2}, {2, 3, 1, 1, 1}, {2}}),
      prim("conv3d_stride",
           [](auto xs) { return wsum(conv3d(xs[0], xs[1], TD(), {2, 2, 2}, {0, 0, 0})); },
           {{1, 1, 5, 5, 5}, {2, 1, 3, 3, 3}}),
      prim("conv3d_relu_mean",
           [](auto xs) { return mean(relu(conv3d(xs[0], xs[1], TD(), {1, 1, 1}, {1, 1, 1}))); },
           {{1, 1, 4, 4, 4}, {2, 1, 3, 3, 3}}),
      prim("relu", [](auto xs) { return wsum(relu(xs[0])); }, {{3, 4}}, kink),
      prim("tanh", [](auto xs) { return wsum(tanh(xs[0])); }, {{3, 4}}),
      prim("square", [](auto xs) { return wsum(square(xs[0])); }, {{3, 4}}),
      prim("max_pool2d", [](auto xs) { return wsum(max_pool2d(xs[0], 2)); }, {{1, 2, 4, 4}},
           distinct),
      prim("max_pool3d", [](auto xs) { return wsum(max_pool3d(xs[0], 2)); }, {{1, 2, 4, 4, 4}},
           distinct),
      prim("nearest_upsample3d", [](auto xs) { return wsum(nearest_upsample3d(xs[0], 2)); },
           {{1, 2, 2, 2, 2}}),
      prim("instance_norm3d", [](auto xs) { return wsum(instance_norm3d(xs[0], xs[1], xs[2])); },
           {{2, 2, 3, 3, 3}, {2}, {2}}),
      prim("dropout", [](auto xs) { return wsum(dropout(xs[0], 0.3, 5, true)); }, {{4, 5}}),
      prim("mean", [](auto xs) { return mean(square(xs[0])); }, {{3, 4}}),
      prim("sum", [](auto xs) { return sum(square(xs[0])); }, {{3, 4}}),
      prim("concat",
           [](auto xs) {
             const TD c[2] = {xs[0], xs[1]};
             return wsum(concat<double>(c, 1));
           },
           {{2, 2, 3}, {2, 1, 3}}),
      prim("slice_view", [](auto xs) { return wsum(slice_view(xs[0], 1, 2)); }, {{2, 4, 3}}),
      prim("reshape", [](auto xs) { return wsum(reshape(xs[0], {6, 2})); }, {{3, 4}}),
      prim("permute", [](auto xs) { return wsum(permute(xs[0], {2, 0, 1})); }, {{2, 3, 4}}),
      prim("minmax_normalize",
           [](auto xs) { return wsum(minmax_normalize(xs[0], 1e-6, 1, false)); }, {{3, 8}},
           distinct),
  };
}

TD target(std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  std::vector<double> v(216);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return TD::constant({1, 1, 6, 6, 6}, std::move(v));
}

std::vector<Case> loss_cases() {
  const Shape vol{1, 1, 6, 6, 6};
  losses::SsimConfig sc;
  sc.window_size = 3;
  // Finite differences cannot see through a detached min/max, so the
  // perceptual terms are checked with the fully differentiated normalization.
  auto pc = perc::default_perc_config();
  pc.detach_minmax = false;

  // The perceptual losses min-max normalize their input, so a wide distinct
  // grid keeps the normalized step far below the gap between values.
  GradCheckOptions perc_opt;
  perc_opt.distinct_spacing = 0.1;
  // SSIM and the combined loss are checked on a standardized-PET scale.
  GradCheckOptions vol_opt;
  vol_opt.distinct_spacing = 0.05;

  std::vector<Case> out;
  out.push_back({"ssim_loss",
                 [sc](std::uint64_t seed) -> GraphBuilder {
                   const TD y = target(40 + seed, -5.0, 5.0);
                   return [sc, y](auto xs) { return losses::ssim_loss(xs[0], y, sc); };
                 },
                 {vol}, vol_opt});
  using PercFn = TD (*)(const TD&, const TD&, const perc::PercConfig&);
  const std::pair<const char*, PercFn> percs[] = {{"perc_2d", &perc::perc_2d<double>},
                                                  {"perc_3d", &perc::perc_3d<double>},
                                                  {"perc_25d", &perc::perc_25d<double>}};
  for (const auto& [name, fn] : percs) {
    out.push_back({name,
                   [pc, fn](std::uint64_t) -> GraphBuilder {
                     const TD y = target(30, -1.0, 1.0);
                     return [pc, fn, y](auto xs) { return fn(xs[0], y, pc); };
                   },
                   {vol}, perc_opt});
  }
  out.push_back({"cyclic_25d",
                 [pc](std::uint64_t) -> GraphBuilder {
                   const TD y = target(30, -1.0, 1.0);
                   return [pc, y](auto xs) {
                     return perc::cyclic_25d(xs[0], y, 4, perc::PlaneSchedule(2, 1.0), pc);
                   };
                 },
                 {vol}, perc_opt});
  for (auto mode : {losses::PercMode::Cyclic25d, losses::PercMode::D2, losses::PercMode::D3,
                    losses::PercMode::D25}) {
    losses::CombinedLossConfig c;
    c.perc_mode = mode;
    c.schedule = perc::PlaneSchedule(1, 1.0);
    out.push_back({"combined_loss_" + std::string(losses::to_string(mode)),
                   [c, pc, sc](std::uint64_t seed) -> GraphBuilder {
                     const TD y = target(40 + seed, -5.0, 5.0);
                     return [c, pc, sc, y, seed](auto xs) {
                       return losses::combined_loss(xs[0], y, seed, c, pc, sc);
                     };
                   },
                   {vol}, vol_opt});
  }
  return out;
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(GradGroup group,
                                               const std::vector<std::uint64_t>& seeds) {
  const auto cases = group == GradGroup::Primitives ? primitive_cases() : loss_cases();
  std::vector<GradSuiteEntry> out;
  for (const auto& c : cases)
    for (std::uint64_t seed : seeds)
      out.push_back({c.name, seed, ad::check_gradients(c.build(seed), c.shapes, seed, c.opt)});
  return out;
}

std::vector<GradSuiteEntry> run_gradient_suite(const std::vector<std::uint64_t>& seeds) {
  auto out = run_gradient_suite(GradGroup::Primitives, seeds);
  const auto more = run_gradient_suite(GradGroup::Losses, seeds);
  out.insert(out.end(), more.begin(), more.end());
  return out;
}

}  // namespace cycpl
