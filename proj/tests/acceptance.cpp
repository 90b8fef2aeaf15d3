// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "cycpl/evalstat/metrics.hpp"
#include "cycpl/evalstat/roi.hpp"
#include "cycpl/evalstat/stats.hpp"
#include "cycpl/gradsuite.hpp"
#include "cycpl/losses.hpp"
#include "cycpl/nets/extractor.hpp"
#include "cycpl/nets/weights.hpp"
#include "cycpl/percloss.hpp"
#include "cycpl/standardize.hpp"
#include "cycpl/trainkit/train.hpp"
#include "cycpl/volume_tensor.hpp"
#include "oracles.hpp"

using namespace cycpl;
namespace fs = std::filesystem;
using TD = ad::Tensor<double>;
using Clock = std::chrono::steady_clock;

namespace {

/// Collects failed sub-checks of one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  bool ok() const { return failed_ == 0; }
  std::string summary() const {
    std::string s = std::to_string(failed_) + " failed:";
    for (const auto& f : failures_) s += " [" + f + "]";
    return s;
  }

 private:
  std::vector<std::string> failures_;
  std::size_t failed_ = 0;
};

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

VolumeGrid random_volume(Dims dims, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<float> v(dims.count());
  for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return VolumeGrid(dims, std::move(v));
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("cycpl_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

// 1. Plane scheduler against the epoch-walking recursion.
Outcome scheduler() {
  const auto t0 = Clock::now();
  Checks c;
  const perc::PlaneSchedule s(120, 0.67);
  const auto expected = oracle::plane_sequence(120, 0.67, 2001);
  std::size_t mismatches = 0;
  for (std::size_t e = 0; e <= 2000; ++e) mismatches += s.active_plane(e) != expected[e];
  c.expect(mismatches == 0, std::to_string(mismatches) + " epochs differ from the recursion");
  c.expect(s.cycle_start(1) == 360, "s1 = " + std::to_string(s.cycle_start(1)));
  c.expect(s.cycle_start(2) == 600, "s2 = " + std::to_string(s.cycle_start(2)));
  c.expect(s.cycle_start(3) == 762, "s3 = " + std::to_string(s.cycle_start(3)));
  for (std::size_t k = 0; s.cycle_start(k + 1) <= 2001; ++k) {
    std::array<std::size_t, 3> count{};
    for (std::size_t e = s.cycle_start(k); e < s.cycle_start(k + 1); ++e)
      ++count[static_cast<std::size_t>(s.active_plane(e))];
    for (auto n : count)
      c.expect(n == s.duration(k), "cycle " + std::to_string(k) + " plane count " + std::to_string(n));
  }
  const double t = seconds_since(t0);
  c.expect(t < 1.0, "took " + fmt(t) + " s");
  return {c.ok(), c.ok() ? "2001 epochs, s1/s2/s3 = 360/600/762, " + fmt(t, 2) + " s" : c.summary()};
}

// 2. Finite-difference gradient suite.
Outcome gradients() {
  const auto t0 = Clock::now();
  const auto entries = run_gradient_suite();
  const double t = seconds_since(t0);
  Checks c;
  double worst = 0;
  std::string worst_name;
  for (const auto& e : entries) {
    if (e.error > worst) worst = e.error, worst_name = e.name;
    c.expect(e.error < kGradTolerance, e.name + " seed " + std::to_string(e.seed) + " error " + fmt(e.error));
  }
  c.expect(!entries.empty(), "empty suite");
  c.expect(t < 120.0, "took " + fmt(t) + " s");
  return {c.ok(), c.ok() ? std::to_string(entries.size()) + " checks, worst " + fmt(worst, 3) + " (" +
                               worst_name + "), " + fmt(t, 3) + " s"
                         : c.summary()};
}

// 3. Perceptual loss identities.
Outcome loss_identities() {
  Checks c;
  const auto cfg = perc::default_perc_config();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto a = to_tensor<double>(random_volume({8, 9, 10}, 10 + seed));
    const auto b = to_tensor<double>(random_volume({8, 9, 10}, 20 + seed));
    double sum = 0;
    for (Plane p : kAllPlanes) sum += perc::plane_perc_loss(a, b, p, cfg).item();
    const double p25 = perc::perc_25d(a, b, cfg).item();
    c.expect(std::abs(p25 - sum) <= 1e-9 * std::abs(sum), "perc_25d vs plane sum " + fmt(p25 - sum, 3));
    const perc::PlaneSchedule sched(6, 0.67);
    for (std::size_t e = 0; e < 60; ++e) {
      const double cyc = perc::cyclic_25d(a, b, e, sched, cfg).item();
      const double active = perc::plane_perc_loss(a, b, sched.active_plane(e), cfg).item();
      c.expect(cyc == active, "cyclic at epoch " + std::to_string(e));
    }
  }
  perc::PercConfig id;
  id.extractor_2d = std::make_shared<nets::FeatureExtractor>(nets::make_identity_extractor(2));
  id.extractor_3d = std::make_shared<nets::FeatureExtractor>(nets::make_identity_extractor(3));
  const auto va = random_volume({5, 6, 7}, 4), vb = random_volume({5, 6, 7}, 5);
  const auto a = to_tensor<double>(va), b = to_tensor<double>(vb);
  for (Plane p : kAllPlanes) {
    const double d = perc::plane_perc_loss(a, b, p, id).item() - oracle::slice_mse(va, vb, p, id.eps_mm);
    c.expect(std::abs(d) <= 1e-7, std::string(to_string(p)) + " identity vs brute force " + fmt(d, 3));
  }
  const double d3 = perc::perc_3d(a, b, id).item() - oracle::volume_mse(va, vb, id.eps_mm);
  c.expect(std::abs(d3) <= 1e-7, "3d identity vs brute force " + fmt(d3, 3));
  return {c.ok(), c.ok() ? "2.5D sum, cyclic selection over 60 epochs, identity extractors" : c.summary()};
}

// 4. SSIM identities, hand value and monotonicity under noise.
Outcome ssim_checks() {
  Checks c;
  const losses::SsimConfig cfg;
  const auto v = to_tensor<double>(random_volume({12, 12, 12}, 1));
  const double self = losses::ssim(v, v, cfg).item();
  c.expect(std::abs(self - 1.0) <= 1e-9, "ssim(v, v) = " + fmt(self, 12));

  losses::SsimConfig fixed;
  fixed.range_mode = losses::RangeMode::Fixed;
  fixed.fixed_range = 1.0;
  const auto lo = to_tensor<double>(VolumeGrid::filled({12, 12, 12}, 0.5f));
  const auto hi = to_tensor<double>(VolumeGrid::filled({12, 12, 12}, 0.7f));
  const double hand = losses::ssim(lo, hi, fixed).item();
  c.expect(std::abs(hand - 0.94595) <= 1e-4, "constant 0.5 vs 0.7 gives " + fmt(hand, 8));

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto base = random_volume({16, 16, 16}, 100 + seed);
    Rng rng(200 + seed);
    std::vector<double> noise(base.size());
    for (auto& n : noise) n = rng.normal();
    double prev = 1.0 + 1e-12;
    for (double amp : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8}) {
      std::vector<float> noisy(base.size());
      for (std::size_t i = 0; i < noisy.size(); ++i)
        noisy[i] = static_cast<float>(base.data()[i] + amp * noise[i]);
      const double s = losses::ssim_value(VolumeGrid(base.dims(), noisy), base, cfg);
      c.expect(s < prev, "seed " + std::to_string(seed) + " amplitude " + fmt(amp));
      prev = s;
    }
  }
  return {c.ok(), c.ok() ? "identity, hand value " + fmt(hand, 6) + ", monotone on 5 seeds" : c.summary()};
}

// 5. Per-manufacturer standardization.
Outcome standardization() {
  Checks c;
  trainkit::PhantomSpec spec;
  spec.n_subjects = 12;
  spec.dims = {8, 8, 8};
  spec.seed = 3;
  const auto subjects = trainkit::gen_phantom(spec);
  const auto split = trainkit::split_subjects(subjects, 8, 2, 3);
  std::vector<stdz::LabeledVolume> train;
  for (auto i : split.train) train.push_back({subjects[i].pet, subjects[i].manufacturer});
  const auto params = stdz::fit_params(train);
  const auto frozen = params;

  for (const auto& [m, st] : params.manufacturers) {
    double s = 0, n = 0;
    std::vector<double> z;
    for (const auto& t : train)
      if (t.manufacturer == m) {
        const auto standardized = stdz::apply_std(t.volume, m, params);
        for (float x : standardized.data()) z.push_back(x), s += x, n += 1;
      }
    const double mean = s / n;
    double ss = 0;
    for (double x : z) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / n);
    c.expect(std::abs(mean) < 1e-6, m + " pooled mean " + fmt(mean, 3));
    c.expect(std::abs(sd - st.std / (st.std + params.epsilon)) < 1e-6, m + " pooled sd " + fmt(sd, 10));
  }
  for (const auto& s : subjects) {
    const auto back = stdz::invert_std(stdz::apply_std(s.pet, s.manufacturer, params), s.manufacturer, params);
    double worst = 0;
    for (std::size_t i = 0; i < back.size(); ++i)
      worst = std::max(worst, std::abs(double(back.data()[i]) - s.pet.data()[i]) /
                                  std::max(1.0, std::abs(double(s.pet.data()[i]))));
    c.expect(worst <= 1e-6, s.id + " round trip " + fmt(worst, 3));
  }
  c.expect(params == frozen, "parameters changed after applying to held-out subjects");

  // The prepared dataset is fitted on the training subset alone.
  const auto data = trainkit::prepare_dataset(subjects, split);
  c.expect(data.params.manufacturers == params.manufacturers, "prepared data fitted beyond the training subset");
  return {c.ok(), c.ok() ? std::to_string(params.manufacturers.size()) + " manufacturers, frozen after fit"
                         : c.summary()};
}

// 6. Statistical tests against enumeration, a hand example and reference tables.
Outcome statistics() {
  using namespace evalstat;
  Checks c;
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> x(n);
    for (auto& v : x) v = std::round(rng.normal(0.3, 1.0) * 4) / 4;
    if (std::all_of(x.begin(), x.end(), [](double v) { return v == 0; })) x[0] = 0.25;
    for (Direction dir : {Direction::Greater, Direction::Less}) {
      const double p = wilcoxon_one_sided(x, dir).p, ref = oracle::wilcoxon_enumerated(x, dir);
      c.expect(std::abs(p - ref) <= 1e-12 * ref, "wilcoxon trial " + std::to_string(trial));
    }
  }
  const auto adj = bh_adjust(std::vector<double>{0.01, 0.02, 0.04});
  c.expect(std::abs(adj[0] - 0.03) < 1e-12 && std::abs(adj[1] - 0.03) < 1e-12 && std::abs(adj[2] - 0.04) < 1e-12,
           "BH on (0.01, 0.02, 0.04)");
  for (const auto& r : oracle::paired_t_refs()) {
    const auto res = paired_t_one_sided(r.d, r.dir);
    c.expect(std::abs(res.statistic - r.t) <= 1e-6 && std::abs(res.p - r.p) <= 1e-6,
             "paired t n = " + std::to_string(r.d.size()));
  }
  for (const auto& r : oracle::shapiro_refs()) {
    const auto sw = shapiro_wilk(r.x);
    c.expect(std::abs(sw.w - r.w) <= 1e-3 && std::abs(sw.p - r.p) <= 1e-3,
             "Shapiro-Wilk n = " + std::to_string(r.x.size()));
  }
  return {c.ok(), c.ok() ? "50 Wilcoxon vectors, BH, " + std::to_string(oracle::paired_t_refs().size()) +
                               " paired t, " + std::to_string(oracle::shapiro_refs().size()) + " Shapiro-Wilk"
                         : c.summary()};
}

// 7. Metrics against plain loops, and the evaluation slice window.
Outcome metrics() {
  using namespace evalstat;
  Checks c;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto g = random_volume({8, 8, 8}, 10 + s), t = random_volume({8, 8, 8}, 20 + s);
    double se = 0, ae = 0, mx = -1e30, mn = 1e30;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double d = double(g.data()[i]) - t.data()[i];
      se += d * d;
      ae += std::abs(d);
      mx = std::max(mx, double(t.data()[i]));
      mn = std::min(mn, double(t.data()[i]));
    }
    const double n = static_cast<double>(g.size());
    c.expect(std::abs(psnr(g, t) - 10 * std::log10(mx * mx / (se / n))) <= 1e-7, "psnr");
    c.expect(std::abs(mae(g, t) - ae / n) <= 1e-7, "mae");
    c.expect(std::abs(nmae(g, t) - ae / n / (mx - mn)) <= 1e-7, "nmae");
  }
  Rng rng(3);
  std::vector<int> lab(6 * 6 * 6);
  for (auto& l : lab) l = static_cast<int>(rng.below(3));
  const LabelMap labels{{6, 6, 6}, lab};
  std::vector<EvalPair> pairs;
  for (std::uint64_t s = 0; s < 4; ++s)
    pairs.push_back({"s" + std::to_string(s), random_volume({6, 6, 6}, 30 + s), random_volume({6, 6, 6}, 40 + s)});
  for (int roi = 0; roi < 3; ++roi) {
    double acc = 0;
    for (const auto& p : pairs) {
      double sg = 0, st = 0, cnt = 0;
      for (std::size_t i = 0; i < lab.size(); ++i)
        if (lab[i] == roi) sg += p.generated.data()[i], st += p.truth.data()[i], cnt += 1;
      acc += (sg / cnt - st / cnt) * (sg / cnt - st / cnt);
    }
    c.expect(std::abs(roi_mse(pairs, labels, roi) - acc / static_cast<double>(pairs.size())) <= 1e-7,
             "roi_mse label " + std::to_string(roi));
  }
  const auto range = scaled_slice_range(128);
  c.expect(range == std::pair<std::size_t, std::size_t>{20, 90},
           "scaled_slice_range(128) = (" + std::to_string(range.first) + ", " + std::to_string(range.second) + ")");
  return {c.ok(), c.ok() ? "psnr, mae, nmae, roi_mse match loops; slice window (20, 90)" : c.summary()};
}

// 8. End-to-end training on the phantom cohort.
Outcome end_to_end() {
  Checks c;
  trainkit::PhantomSpec spec;
  spec.n_subjects = 40;
  spec.dims = {32, 32, 32};
  spec.seed = 7;
  const auto subjects = trainkit::gen_phantom(spec);
  const auto split = trainkit::split_subjects(subjects, 24, 8, 7);
  const auto data = trainkit::prepare_dataset(subjects, split);

  trainkit::TrainConfig cfg;
  cfg.max_epochs = 200;
  cfg.t0 = 6;
  cfg.gamma = 0.67;
  cfg.lambda = 0.5;
  cfg.lr_max = 1e-3;
  cfg.cosine_period = 120;
  cfg.patience = 30;
  cfg.unet.channels = {4, 8, 16};
  cfg.seed = 7;
  const auto pc = perc::default_perc_config();
  const auto sched = cfg.schedule();

  const auto test_ssim = [&](const trainkit::TrainResult& r) {
    const auto params = nets::to_params<float>(r.best_weights, false);
    double acc = 0;
    for (const auto& s : data.test) acc += losses::ssim_value(trainkit::predict(params, cfg.unet, s.mri), s.pet);
    return acc / static_cast<double>(data.test.size());
  };

  const auto t0 = Clock::now();
  std::size_t label_mismatches = 0;
  const auto result = trainkit::train(cfg, pc, data.train, data.val, scratch("e2e_cyclic"),
                                      [&](const trainkit::EpochRecord& e) {
                                        label_mismatches += e.plane != to_string(sched.active_plane(e.epoch));
                                      });
  const double cyclic = test_ssim(result);
  const double t = seconds_since(t0);
  c.expect(label_mismatches == 0, std::to_string(label_mismatches) + " plane labels differ from the schedule");
  c.expect(cyclic >= 0.80, "test SSIM " + fmt(cyclic) + " < 0.80");
  c.expect(t < 1200.0, "took " + fmt(t) + " s");

  // Reference run without the perceptual term, reported but not gated.
  auto voxel_cfg = cfg;
  voxel_cfg.perc_mode = losses::PercMode::None;
  voxel_cfg.lambda = 0.0;
  const auto baseline = trainkit::train(voxel_cfg, pc, data.train, data.val, scratch("e2e_voxel"));
  const double voxel = test_ssim(baseline);

  const std::string detail = "cyclic test SSIM " + fmt(cyclic) + " (best epoch " + std::to_string(result.best_epoch) +
                             " of " + std::to_string(result.history.size()) + ", " + fmt(t, 4) +
                             " s); voxel-only baseline " + fmt(voxel);
  return {c.ok(), c.ok() ? detail : c.summary() + "; " + detail};
}

// 9. Byte-identical CLI pipeline across two runs with one seed.
Outcome pipeline_determinism() {
  Checks c;
  std::vector<fs::path> roots;
  for (const char* name : {"pipe_a", "pipe_b"}) {
    const auto root = scratch(name);
    write_text(root / "cfg/gen.json", R"({"n_subjects": 10, "dims": [12, 12, 12]})");
    write_text(root / "cfg/std.json", R"({"manifest": "../ph/manifest.csv", "n_train": 6, "n_val": 2})");
    write_text(root / "cfg/train.json",
               R"({"manifest": "../st/manifest.csv", "split": "../st/split.json", "max_epochs": 4,
                   "channels": [2, 4], "t0": 1, "gamma": 1.0, "ssim_window": 5})");
    write_text(root / "cfg/eval.json",
               R"({"model": "../tr/model.json", "manifest": "../st/manifest.csv",
                   "split": "../st/split.json", "ssim_window": 5})");
    write_text(root / "cfg/eval3.json",
               R"({"model": "../tr/model.json", "manifest": "../st/manifest.csv",
                   "split": "../st/split.json", "ssim_window": 3})");
    write_text(root / "cfg/stats.json", R"({"a": "../ev/metrics.csv", "b": "../ev3/metrics.csv"})");
    const auto at = [&](const char* d) { return (root / d).string(); };
    const auto cfg = [&](const char* f) { return (root / "cfg" / f).string(); };
    const std::vector<std::vector<std::string>> steps = {
        {"--seed", "11", "--out", at("ph"), "gen-phantom", "--config", cfg("gen.json")},
        {"--seed", "11", "--out", at("st"), "standardize", "--config", cfg("std.json")},
        {"--seed", "11", "--out", at("tr"), "train", "--config", cfg("train.json")},
        {"--seed", "11", "--out", at("ev"), "eval", "--config", cfg("eval.json")},
        {"--seed", "11", "--out", at("ev3"), "eval", "--config", cfg("eval3.json")},
        {"--seed", "11", "--out", at("sx"), "stats", "--config", cfg("stats.json")},
    };
    for (const auto& step : steps) {
      std::ostringstream out, err;
      const int code = cli::run_cli(step, out, err);
      c.expect(code == 0, step[4] + " exited " + std::to_string(code) + ": " + err.str());
    }
    roots.push_back(root);
  }
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(roots[0])) {
    const auto ext = entry.path().extension();
    if (!entry.is_regular_file() || (ext != ".csv" && ext != ".cpwt")) continue;
    const auto rel = fs::relative(entry.path(), roots[0]);
    c.expect(fs::exists(roots[1] / rel) && slurp(entry.path()) == slurp(roots[1] / rel), rel.string() + " differs");
    ++compared;
  }
  c.expect(compared >= 8, "only " + std::to_string(compared) + " artifacts compared");
  return {c.ok(), c.ok() ? std::to_string(compared) + " CSV/CPWT artifacts byte-identical" : c.summary()};
}

// 10. VVOL and CPWT round trips.
Outcome round_trips() {
  Checks c;
  const auto dir = scratch("io");
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims dims{1 + rng.below(12), 1 + rng.below(12), 1 + rng.below(12)};
    std::vector<float> v(dims.count());
    for (auto& x : v) x = static_cast<float>(rng.normal(0.0, std::pow(10.0, rng.uniform(-6.0, 6.0))));
    const auto modality = rng.bernoulli(0.5) ? Modality::MRI : Modality::PET;
    const VolumeGrid vol(dims, v, modality);
    c.expect(decode_vvol(encode_vvol(vol), modality).bit_equal(vol), "VVOL bytes trial " + std::to_string(trial));
    const auto path = dir / ("v" + std::to_string(trial) + ".vvol");
    write_vvol(vol, path);
    c.expect(read_vvol(path, modality).bit_equal(vol), "VVOL file trial " + std::to_string(trial));

    nets::WeightMap w;
    const std::size_t records = 1 + rng.below(5);
    for (std::size_t r = 0; r < records; ++r) {
      std::string name;
      for (std::size_t k = 0, len = 1 + rng.below(16); k < len; ++k)
        name += "abcdefghijklmnopqrstuvwxyz0123456789._"[rng.below(38)];
      nets::NdArray a;
      std::size_t count = 1;
      for (std::size_t d = 0, nd = 1 + rng.below(5); d < nd; ++d) {
        a.shape.push_back(1 + rng.below(4));
        count *= a.shape.back();
      }
      a.data.resize(count);
      for (auto& x : a.data) x = static_cast<float>(rng.normal());
      w[name] = std::move(a);
    }
    c.expect(nets::bit_equal(nets::decode_weights(nets::encode_weights(w)), w),
             "CPWT bytes trial " + std::to_string(trial));
    const auto wpath = dir / ("w" + std::to_string(trial) + ".cpwt");
    nets::save_weights(w, wpath);
    c.expect(nets::bit_equal(nets::load_weights(wpath), w), "CPWT file trial " + std::to_string(trial));
  }
  return {c.ok(), c.ok() ? "100 VVOL and 100 CPWT payloads bit-exact through bytes and files" : c.summary()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"plane scheduler", scheduler},
      {"gradient checks", gradients},
      {"perceptual loss identities", loss_identities},
      {"ssim", ssim_checks},
      {"standardization", standardization},
      {"statistical tests", statistics},
      {"metrics", metrics},
      {"end-to-end training", end_to_end},
      {"pipeline determinism", pipeline_determinism},
      {"file format round trips", round_trips},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << i + 1 << ' ' << (o.pass ? "PASS" : "FAIL") << ' ' << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
