#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cycpl/autodiff/tensor.hpp"

namespace cycpl::ad {

/// Builds a scalar loss from the (seeded) input tensors.
using GraphBuilder = std::function<Tensor<double>(std::span<const Tensor<double>>)>;

struct GradCheckOptions {
  double step = 1e-3;
  /// Inputs with |x| below the margin are pushed to +-margin, keeping ReLU
  /// style kinks out of the finite-difference stencil.
  double kink_margin = 0.0;
  /// Replace every input with a shuffled grid spaced by this amount (so
  /// max-pool windows have no near-ties). 0 disables.
  double distinct_spacing = 0.0;
  /// Optional override of the generated inputs.
  std::function<void(std::size_t input, std::vector<double>& values)> init;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central finite differences in double precision against reverse mode;
/// error per element is |ga - gfd| / max(1e-8, |ga| + |gfd|).
GradCheckResult check_gradients_detailed(const GraphBuilder& builder,
                                         const std::vector<Shape>& shapes, std::uint64_t seed,
                                         const GradCheckOptions& options = {});

double check_gradients(const GraphBuilder& builder, const std::vector<Shape>& shapes,
                       std::uint64_t seed, const GradCheckOptions& options = {});

}  // namespace cycpl::ad
