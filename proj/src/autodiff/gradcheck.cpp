#include "cycpl/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cycpl/error.hpp"
#include "cycpl/rng.hpp"

namespace cycpl::ad {

namespace {

std::vector<std::vector<double>> make_inputs(const std::vector<Shape>& shapes, std::uint64_t seed,
                                             const GradCheckOptions& opt) {
  Rng rng(seed);
  std::vector<std::vector<double>> values;
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    std::vector<double> v(numel(shapes[k]));
    if (opt.distinct_spacing > 0) {
      std::vector<std::size_t> perm(v.size());
      std::iota(perm.begin(), perm.end(), 0);
      for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
      const double center = 0.5 * static_cast<double>(v.size());
      for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = (static_cast<double>(perm[i]) - center + 0.5) * opt.distinct_spacing;
    } else {
      for (auto& x : v) x = rng.normal();
    }
    if (opt.kink_margin > 0) {
      for (auto& x : v)
        if (std::abs(x) < opt.kink_margin) x = x < 0 ? -opt.kink_margin : opt.kink_margin;
    }
    if (opt.init) opt.init(k, v);
    values.push_back(std::move(v));
  }
  return values;
}

double eval_loss(const GraphBuilder& builder, const std::vector<Shape>& shapes,
                 const std::vector<std::vector<double>>& values) {
  NoGradGuard guard;
  std::vector<Tensor<double>> inputs;
  for (std::size_t k = 0; k < shapes.size(); ++k)
    inputs.push_back(Tensor<double>::constant(shapes[k], values[k]));
  return builder(inputs).item();
}

}  // namespace

GradCheckResult check_gradients_detailed(const GraphBuilder& builder,
                                         const std::vector<Shape>& shapes, std::uint64_t seed,
                                         const GradCheckOptions& opt) {
  auto values = make_inputs(shapes, seed, opt);

  std::vector<Tensor<double>> inputs;
  for (std::size_t k = 0; k < shapes.size(); ++k)
    inputs.push_back(Tensor<double>::parameter(shapes[k], values[k]));
  const Tensor<double> loss = builder(inputs);
  if (loss.numel() != 1) fail(ErrorCode::NonScalarLoss, "gradient check needs a scalar loss");
  backward(loss);

  GradCheckResult res;
  const double h = opt.step;
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const auto grad = inputs[k].grad();
    for (std::size_t i = 0; i < values[k].size(); ++i) {
      const double orig = values[k][i];
      values[k][i] = orig + h;
      const double up = eval_loss(builder, shapes, values);
      values[k][i] = orig - h;
      const double down = eval_loss(builder, shapes, values);
      values[k][i] = orig;
      const double fd = (up - down) / (2.0 * h);
      const double ga = grad.empty() ? 0.0 : grad[i];
      const double err = std::abs(ga - fd) / std::max(1e-8, std::abs(ga) + std::abs(fd));
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_input = k;
        res.worst_index = i;
        res.analytic = ga;
        res.numeric = fd;
      }
    }
  }
  return res;
}

double check_gradients(const GraphBuilder& builder, const std::vector<Shape>& shapes,
                       std::uint64_t seed, const GradCheckOptions& options) {
  return check_gradients_detailed(builder, shapes, seed, options).max_rel_error;
}

}  // namespace cycpl::ad
