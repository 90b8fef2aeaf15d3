#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cycpl/nets/weights.hpp"
#include "cycpl/percloss.hpp"

namespace cycpl::trainkit {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamMoments {
  std::vector<double> m, v;
  std::size_t t = 0;
};

/// One bias-corrected Adam update of `param` in place.
void adam_step(std::span<float> param, std::span<const float> grad, AdamMoments& state, double lr,
               const AdamConfig& cfg = {});

/// Adam over a named parameter set with per-tensor state. Tensors without a
/// gradient are updated as if their gradient were zero.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(nets::ParamMap<float>& params, double lr);

 private:
  AdamConfig cfg_;
  std::map<std::string, AdamMoments> state_;
};

/// Cosine annealing with a warm restart every `period` epochs.
double cosine_lr(std::size_t epoch, double lr_max, std::size_t period, double lr_min = 0.0);

enum class EarlyStopMode { AfterSecondCycle, AfterFirstCosineCycle };

std::string_view to_string(EarlyStopMode m);
EarlyStopMode parse_early_stop_mode(std::string_view s);

/// First epoch at which non-improving epochs are counted: s_2 of the plane
/// schedule, or the cosine period.
std::size_t activation_epoch(EarlyStopMode mode, const perc::PlaneSchedule& sched,
                             std::size_t cosine_period);

struct EarlyStopState {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t counter = 0;
  bool counting_active = false;
  std::size_t activation = 0;
};

enum class StopDecision { Continue, Stop };

/// Records the validation loss of epoch `e`. A strict improvement resets the
/// counter; otherwise the counter grows only once counting is active.
StopDecision early_stop_update(EarlyStopState& state, double val_loss, std::size_t e,
                               std::size_t activation, std::size_t patience);

}  // namespace cycpl::trainkit
