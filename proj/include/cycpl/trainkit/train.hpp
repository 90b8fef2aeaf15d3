#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cycpl/losses.hpp"
#include "cycpl/nets/unet.hpp"
#include "cycpl/percloss.hpp"
#include "cycpl/standardize.hpp"
#include "cycpl/trainkit/augment.hpp"
#include "cycpl/trainkit/optim.hpp"
#include "cycpl/trainkit/phantom.hpp"

namespace cycpl::trainkit {

using Subject = PhantomSubject;

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

/// Seeded partition of n subjects; whatever is not train or val is test.
SplitIndices split_indices(std::size_t n, std::size_t n_train, std::size_t n_val,
                           std::uint64_t seed);

/// split_indices, then held-out subjects are swapped into the training subset
/// until every manufacturer present is represented there (standardization is
/// fitted on the training subset only). Subset sizes are unchanged.
SplitIndices split_subjects(std::span<const Subject> subjects, std::size_t n_train,
                            std::size_t n_val, std::uint64_t seed);

struct PreparedData {
  std::vector<Subject> train, val, test;
  stdz::ManufacturerParams params;
};

/// Fits PET standardization on the train subset only and applies it to every
/// subset. MRI is passed through unchanged.
PreparedData prepare_dataset(std::span<const Subject> subjects, const SplitIndices& split,
                             const stdz::FitOptions& fit = {});

enum class ValLossMode { Combined, VoxelSsim };

struct TrainConfig {
  std::size_t max_epochs = 1000;
  std::size_t patience = 30;
  double lr_max = 5e-4;
  std::size_t cosine_period = 120;
  std::size_t batch_size = 1;
  double lambda = 0.5;
  losses::PercMode perc_mode = losses::PercMode::Cyclic25d;
  std::size_t t0 = 120;
  double gamma = 0.67;
  /// Unset: after the second plane cycle for the cyclic mode, after the first
  /// cosine period otherwise.
  std::optional<EarlyStopMode> early_stop_mode;
  ValLossMode val_loss = ValLossMode::Combined;
  bool augment = true;
  AugmentConfig augment_cfg;
  nets::UNet3DConfig unet;
  losses::SsimConfig ssim;
  std::uint64_t seed = 0;

  void validate() const;
  EarlyStopMode resolved_early_stop() const;
  perc::PlaneSchedule schedule() const { return {t0, gamma}; }
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string plane;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_ssim = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  nets::WeightMap best_weights;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Plane label written to the history for an epoch.
std::string plane_label(const TrainConfig& cfg, const perc::PercConfig& pc, std::size_t epoch);

/// Trains the U-Net on standardized pairs. Writes <out_dir>/best.cpwt (best
/// validation loss) and <out_dir>/history.csv. Throws NonFiniteLoss.
TrainResult train(const TrainConfig& cfg, const perc::PercConfig& pc,
                  std::span<const Subject> train_set, std::span<const Subject> val_set,
                  const std::filesystem::path& out_dir, const EpochObserver& observer = {});

/// Eval-mode prediction for one MRI volume.
VolumeGrid predict(const nets::ParamMap<float>& params, const nets::UNet3DConfig& cfg,
                   const VolumeGrid& mri);

}  // namespace cycpl::trainkit
