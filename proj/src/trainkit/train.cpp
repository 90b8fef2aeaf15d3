#include "cycpl/trainkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cycpl/autodiff/ops.hpp"
#include "cycpl/csv.hpp"
#include "cycpl/error.hpp"
#include "cycpl/rng.hpp"
#include "cycpl/volume_tensor.hpp"

namespace cycpl::trainkit {

namespace {

enum Stream : std::uint64_t { kInit = 1, kShuffle = 2, kAugment = 3, kDropout = 4 };

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

}  // namespace

SplitIndices split_indices(std::size_t n, std::size_t n_train, std::size_t n_val,
                           std::uint64_t seed) {
  if (n_train == 0 || n_train + n_val > n)
    fail(ErrorCode::Config, "split needs 1 <= n_train and n_train + n_val <= n");
  const auto p = permutation(n, seed);
  SplitIndices s;
  s.train.assign(p.begin(), p.begin() + static_cast<long>(n_train));
  s.val.assign(p.begin() + static_cast<long>(n_train), p.begin() + static_cast<long>(n_train + n_val));
  s.test.assign(p.begin() + static_cast<long>(n_train + n_val), p.end());
  return s;
}

SplitIndices split_subjects(std::span<const Subject> subjects, std::size_t n_train,
                            std::size_t n_val, std::uint64_t seed) {
  SplitIndices s = split_indices(subjects.size(), n_train, n_val, seed);
  std::map<std::string, std::size_t> in_train;
  for (std::size_t i : s.train) ++in_train[subjects[i].manufacturer];
  for (auto* held : {&s.val, &s.test}) {
    for (std::size_t& h : *held) {
      const std::string& label = subjects[h].manufacturer;
      if (in_train.contains(label)) continue;
      // Give up the last training subject whose manufacturer stays covered.
      auto donor = std::find_if(s.train.rbegin(), s.train.rend(), [&](std::size_t t) {
        return in_train.at(subjects[t].manufacturer) > 1;
      });
      if (donor == s.train.rend())
        fail(ErrorCode::Config, "n_train = " + std::to_string(n_train) +
                                    " cannot cover every manufacturer in the training subset");
      --in_train[subjects[*donor].manufacturer];
      ++in_train[label];
      std::swap(*donor, h);
    }
  }
  return s;
}

PreparedData prepare_dataset(std::span<const Subject> subjects, const SplitIndices& split,
                             const stdz::FitOptions& fit) {
  std::vector<stdz::LabeledVolume> train_pet;
  for (std::size_t i : split.train) train_pet.push_back({subjects[i].pet, subjects[i].manufacturer});
  PreparedData out;
  out.params = stdz::fit_params(train_pet, fit);
  const auto take = [&](const std::vector<std::size_t>& idx, std::vector<Subject>& dst) {
    for (std::size_t i : idx) {
      Subject s = subjects[i];
      s.pet = stdz::apply_std(s.pet, s.manufacturer, out.params);
      dst.push_back(std::move(s));
    }
  };
  take(split.train, out.train);
  take(split.val, out.val);
  take(split.test, out.test);
  return out;
}

void TrainConfig::validate() const {
  if (max_epochs < 1) fail(ErrorCode::Config, "max_epochs must be >= 1");
  if (patience < 1) fail(ErrorCode::Config, "patience must be >= 1");
  if (!(lr_max > 0.0)) fail(ErrorCode::Config, "lr_max must be positive");
  if (cosine_period < 1) fail(ErrorCode::Config, "cosine period must be >= 1");
  if (batch_size < 1) fail(ErrorCode::Config, "batch size must be >= 1");
  if (!(lambda >= 0.0)) fail(ErrorCode::Config, "lambda must be >= 0");
  if (t0 < 1 || !(gamma > 0.0)) fail(ErrorCode::Config, "schedule needs T0 >= 1 and gamma > 0");
  try {
    unet.validate();
    ssim.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, e.what());
  }
  augment_cfg.validate();
}

EarlyStopMode TrainConfig::resolved_early_stop() const {
  if (early_stop_mode) return *early_stop_mode;
  return perc_mode == losses::PercMode::Cyclic25d ? EarlyStopMode::AfterSecondCycle
                                                  : EarlyStopMode::AfterFirstCosineCycle;
}

std::string plane_label(const TrainConfig& cfg, const perc::PercConfig& pc, std::size_t epoch) {
  switch (cfg.perc_mode) {
    case losses::PercMode::Cyclic25d: return std::string(to_string(cfg.schedule().active_plane(epoch)));
    case losses::PercMode::D2: return std::string(to_string(pc.baseline_plane));
    case losses::PercMode::D25: return "all";
    case losses::PercMode::D3: return "volume";
    case losses::PercMode::None: return "none";
  }
  return "none";
}

VolumeGrid predict(const nets::ParamMap<float>& params, const nets::UNet3DConfig& cfg,
                   const VolumeGrid& mri) {
  ad::NoGradGuard guard;
  return to_volume(nets::unet3d_forward(params, cfg, to_tensor<float>(mri), false), 0);
}

TrainResult train(const TrainConfig& cfg, const perc::PercConfig& pc,
                  std::span<const Subject> train_set, std::span<const Subject> val_set,
                  const std::filesystem::path& out_dir, const EpochObserver& observer) {
  cfg.validate();
  pc.validate();
  if (train_set.empty()) fail(ErrorCode::Config, "training set is empty");
  if (val_set.empty()) fail(ErrorCode::Config, "validation set is empty");
  std::filesystem::create_directories(out_dir);

  losses::CombinedLossConfig lc;
  lc.lambda = cfg.lambda;
  lc.perc_mode = cfg.perc_mode;
  lc.schedule = cfg.schedule();
  losses::CombinedLossConfig val_lc = lc;
  if (cfg.val_loss == ValLossMode::VoxelSsim) val_lc.perc_mode = losses::PercMode::None;
  const std::size_t activation = activation_epoch(cfg.resolved_early_stop(), lc.schedule, cfg.cosine_period);

  auto params = nets::to_params<float>(nets::init_weights(cfg.unet, derive_seed(cfg.seed, {kInit})), true);
  Adam adam;
  EarlyStopState stop;
  TrainResult result;
  result.best_weights = nets::from_params(params);

  std::vector<ad::Tensor<float>> val_mri, val_pet;
  for (const auto& s : val_set) {
    val_mri.push_back(to_tensor<float>(s.mri));
    val_pet.push_back(to_tensor<float>(s.pet));
  }

  CsvTable history;
  history.header = {"epoch", "plane", "lr", "train_loss", "val_loss", "val_ssim"};
  const auto history_path = out_dir / "history.csv";
  const auto ckpt_path = out_dir / "best.cpwt";

  std::size_t step = 0;
  for (std::size_t e = 0; e < cfg.max_epochs; ++e) {
    const double lr = cosine_lr(e, cfg.lr_max, cfg.cosine_period);
    const auto order = permutation(train_set.size(), derive_seed(cfg.seed, {kShuffle, e}));
    double train_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      std::vector<VolumeGrid> xs, ys;
      for (std::size_t j = b0; j < std::min(order.size(), b0 + cfg.batch_size); ++j) {
        const Subject& s = train_set[order[j]];
        if (cfg.augment) {
          auto [x, y] = augment_pair(s.mri, s.pet, derive_seed(cfg.seed, {kAugment, e, j}), cfg.augment_cfg);
          xs.push_back(std::move(x));
          ys.push_back(std::move(y));
        } else {
          xs.push_back(s.mri);
          ys.push_back(s.pet);
        }
      }
      const auto x = to_batch<float>(xs), y = to_batch<float>(ys);
      const auto yhat = nets::unet3d_forward(params, cfg.unet, x, true, derive_seed(cfg.seed, {kDropout, step}));
      const auto loss = losses::combined_loss(yhat, y, e, lc, pc, cfg.ssim);
      const double lv = loss.item();
      if (!std::isfinite(lv))
        fail(ErrorCode::NonFiniteLoss, "training loss is " + format_number(lv) + " at epoch " +
                                           std::to_string(e) + ", subject " + train_set[order[b0]].id);
      for (auto& [name, t] : params) t.zero_grad();
      ad::backward(loss);
      adam.step(params, lr);
      train_total += lv;
      ++batches;
      ++step;
    }

    double val_total = 0.0, ssim_total = 0.0;
    {
      ad::NoGradGuard guard;
      for (std::size_t i = 0; i < val_set.size(); ++i) {
        const auto yhat = nets::unet3d_forward(params, cfg.unet, val_mri[i], false);
        const double vl = losses::combined_loss(yhat, val_pet[i], e, val_lc, pc, cfg.ssim).item();
        if (!std::isfinite(vl))
          fail(ErrorCode::NonFiniteLoss, "validation loss is " + format_number(vl) + " at epoch " +
                                             std::to_string(e) + ", subject " + val_set[i].id);
        val_total += vl;
        ssim_total += losses::ssim(yhat, val_pet[i], cfg.ssim).item();
      }
    }

    EpochRecord rec;
    rec.epoch = e;
    rec.plane = plane_label(cfg, pc, e);
    rec.lr = lr;
    rec.train_loss = train_total / static_cast<double>(batches);
    rec.val_loss = val_total / static_cast<double>(val_set.size());
    rec.val_ssim = ssim_total / static_cast<double>(val_set.size());
    result.history.push_back(rec);
    history.rows.push_back({std::to_string(e), rec.plane, format_number(rec.lr),
                            format_number(rec.train_loss), format_number(rec.val_loss),
                            format_number(rec.val_ssim)});

    const double prev_best = stop.best;
    const auto decision = early_stop_update(stop, rec.val_loss, e, activation, cfg.patience);
    if (stop.best < prev_best) {
      result.best_weights = nets::from_params(params);
      result.best_epoch = e;
      result.best_val_loss = stop.best;
      nets::save_weights(result.best_weights, ckpt_path);
    }
    write_csv(history, history_path);
    if (observer) observer(rec);
    if (decision == StopDecision::Stop) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace cycpl::trainkit
