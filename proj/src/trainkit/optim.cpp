#include "cycpl/trainkit/optim.hpp"

#include <cmath>
#include <numbers>

#include "cycpl/error.hpp"

namespace cycpl::trainkit {

void adam_step(std::span<float> param, std::span<const float> grad, AdamMoments& s, double lr,
               const AdamConfig& cfg) {
  if (!grad.empty() && grad.size() != param.size())
    fail(ErrorCode::ShapeMismatch, "Adam: gradient and parameter sizes differ");
  if (s.m.empty()) {
    s.m.assign(param.size(), 0.0);
    s.v.assign(param.size(), 0.0);
  } else if (s.m.size() != param.size()) {
    fail(ErrorCode::ShapeMismatch, "Adam: state does not match the parameter");
  }
  ++s.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.empty() ? 0.0 : grad[i];
    s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * g;
    s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mh = s.m[i] / c1, vh = s.v[i] / c2;
    param[i] = static_cast<float>(param[i] - lr * mh / (std::sqrt(vh) + cfg.eps));
  }
}

void Adam::step(nets::ParamMap<float>& params, double lr) {
  for (auto& [name, t] : params) {
    if (!t.requires_grad()) continue;
    adam_step(t.mutable_values(), t.grad(), state_[name], lr, cfg_);
  }
}

double cosine_lr(std::size_t epoch, double lr_max, std::size_t period, double lr_min) {
  if (period == 0) fail(ErrorCode::InvalidAttribute, "cosine period must be >= 1");
  const double phase = static_cast<double>(epoch % period) / static_cast<double>(period);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * phase));
}

std::string_view to_string(EarlyStopMode m) {
  return m == EarlyStopMode::AfterSecondCycle ? "after_second_cycle" : "after_first_cosine_cycle";
}

EarlyStopMode parse_early_stop_mode(std::string_view s) {
  if (s == "after_second_cycle") return EarlyStopMode::AfterSecondCycle;
  if (s == "after_first_cosine_cycle") return EarlyStopMode::AfterFirstCosineCycle;
  fail(ErrorCode::Config, "unknown early-stop mode '" + std::string(s) + "'");
}

std::size_t activation_epoch(EarlyStopMode mode, const perc::PlaneSchedule& sched,
                             std::size_t cosine_period) {
  return mode == EarlyStopMode::AfterSecondCycle ? sched.cycle_start(2) : cosine_period;
}

StopDecision early_stop_update(EarlyStopState& st, double val_loss, std::size_t e,
                               std::size_t activation, std::size_t patience) {
  if (patience < 1) fail(ErrorCode::InvalidAttribute, "patience must be >= 1");
  st.activation = activation;
  st.counting_active = e >= activation;
  if (val_loss < st.best) {
    st.best = val_loss;
    st.best_epoch = e;
    st.counter = 0;
  } else if (st.counting_active) {
    ++st.counter;
  }
  return st.counter >= patience ? StopDecision::Stop : StopDecision::Continue;
}

}  // namespace cycpl::trainkit
