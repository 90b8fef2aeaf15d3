#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cycpl {

enum class GradGroup { Primitives, Losses };

struct GradSuiteEntry {
  std::string name;
  std::uint64_t seed = 0;
  double error = 0.0;
};

inline constexpr double kGradTolerance = 1e-4;

/// Finite-difference checks in double precision (step 1e-3). Primitives:
/// every autodiff op with a numerical derivative. Losses: ssim_loss, the
/// perceptual variants with the tiny extractor and the combined loss in every
/// perceptual mode, all on 6^3 volumes.
std::vector<GradSuiteEntry> run_gradient_suite(GradGroup group,
                                               const std::vector<std::uint64_t>& seeds = {1, 2, 3});

/// Both groups.
std::vector<GradSuiteEntry> run_gradient_suite(const std::vector<std::uint64_t>& seeds = {1, 2, 3});

}  // namespace cycpl
