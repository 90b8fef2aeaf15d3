#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "cycpl/csv.hpp"
#include "cycpl/error.hpp"
#include "cycpl/evalstat/metrics.hpp"
#include "cycpl/evalstat/report_io.hpp"
#include "cycpl/evalstat/roi.hpp"
#include "cycpl/evalstat/stats.hpp"
#include "cycpl/gradsuite.hpp"
#include "cycpl/nets/extractor.hpp"
#include "cycpl/parallel.hpp"
#include "cycpl/standardize.hpp"
#include "cycpl/trainkit/train.hpp"
#include "cycpl/volgrid.hpp"
#include "json.hpp"

namespace cycpl::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
};

// A JSON config object whose relative paths resolve against the directory of
// the file it came from.
class Config {
 public:
  static Config load(const std::string& path) {
    if (path.empty()) return Config(json::object(), fs::current_path(), "<defaults>");
    std::ifstream in(path);
    if (!in) fail(ErrorCode::Config, "cannot open config " + path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      fail(ErrorCode::Config, path + ": " + e.what());
    }
    if (!doc.is_object()) fail(ErrorCode::Config, path + ": config must be a JSON object");
    return Config(std::move(doc), fs::absolute(path).parent_path(), path);
  }

  void allow(std::initializer_list<const char*> keys) const {
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : doc_.items())
      if (!ok.contains(k)) fail(ErrorCode::Config, where_ + ": unknown key '" + k + "'");
  }

  bool has(const std::string& key) const { return doc_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    return has(key) ? req<T>(key) : fallback;
  }

  template <typename T>
  T req(const std::string& key) const {
    if (!has(key)) fail(ErrorCode::Config, where_ + ": missing key '" + key + "'");
    const json& v = doc_.at(key);
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::vector<std::size_t>>) {
      const auto unsigned_ok = [](const json& e) { return e.is_number_unsigned(); };
      if (v.is_array() ? !std::all_of(v.begin(), v.end(), unsigned_ok) : !unsigned_ok(v))
        fail(ErrorCode::Config, where_ + ": '" + key + "' must be a non-negative integer");
    }
    try {
      return v.get<T>();
    } catch (const json::exception& e) {
      fail(ErrorCode::Config, where_ + ": key '" + key + "': " + e.what());
    }
  }

  fs::path path(const std::string& key) const { return resolve(req<std::string>(key)); }
  fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_ / p; }
  const json& at(const std::string& key) const { return doc_.at(key); }
  const std::string& where() const { return where_; }

 private:
  Config(json doc, fs::path base, std::string where)
      : doc_(std::move(doc)), base_(std::move(base)), where_(std::move(where)) {}
  json doc_;
  fs::path base_;
  std::string where_;
};

// ---- manifests and subject selection ------------------------------------

struct ManifestRow {
  std::string id, manufacturer;
  fs::path mri, pet;
};

std::vector<ManifestRow> read_manifest(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t ci = t.column("subject"), cm = t.column("manufacturer"),
                    cr = t.column("mri"), cp = t.column("pet");
  const fs::path dir = fs::absolute(path).parent_path();
  std::vector<ManifestRow> rows;
  std::set<std::string> seen;
  for (const auto& r : t.rows) {
    if (!seen.insert(r[ci]).second)
      fail(ErrorCode::DuplicateName, path.string() + ": subject '" + r[ci] + "' listed twice");
    rows.push_back({r[ci], r[cm], dir / r[cr], dir / r[cp]});
  }
  if (rows.empty()) fail(ErrorCode::MissingField, path.string() + ": manifest has no subjects");
  return rows;
}

fs::path relative_to(const fs::path& p, const fs::path& dir) {
  return fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(dir).lexically_normal());
}

void write_manifest(const std::vector<ManifestRow>& rows, const fs::path& path) {
  CsvTable t;
  t.header = {"subject", "manufacturer", "mri", "pet"};
  const fs::path dir = path.parent_path();
  for (const auto& r : rows)
    t.rows.push_back({r.id, r.manufacturer, relative_to(r.mri, dir).generic_string(),
                      relative_to(r.pet, dir).generic_string()});
  write_csv(t, path);
}

struct Split {
  std::vector<std::string> train, val, test;
};

Split read_split(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open split " + path.string());
  try {
    const json j = json::parse(in);
    for (const auto& [k, v] : j.items())
      if (k != "train" && k != "val" && k != "test")
        fail(ErrorCode::Config, path.string() + ": unknown key '" + k + "'");
    Split s;
    s.train = j.value("train", std::vector<std::string>{});
    s.val = j.value("val", std::vector<std::string>{});
    s.test = j.value("test", std::vector<std::string>{});
    return s;
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, path.string() + ": " + e.what());
  }
}

void write_split(const Split& s, const fs::path& path) {
  ojson j;
  j["train"] = s.train;
  j["val"] = s.val;
  j["test"] = s.test;
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
}

std::vector<ManifestRow> pick(const std::vector<ManifestRow>& rows,
                              const std::vector<std::string>& ids, const std::string& what) {
  std::map<std::string, const ManifestRow*> by_id;
  for (const auto& r : rows) by_id[r.id] = &r;
  std::vector<ManifestRow> out;
  std::set<std::string> seen;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorCode::Config, what + ": subject '" + id + "' is not in the manifest");
    if (!seen.insert(id).second) fail(ErrorCode::Config, what + ": subject '" + id + "' listed twice");
    out.push_back(*it->second);
  }
  return out;
}

// "subjects": [...] or "split": file + "subset": train|val|test; default all.
std::vector<ManifestRow> select_subjects(const Config& c, const std::vector<ManifestRow>& rows) {
  if (c.has("subjects") && c.has("split"))
    fail(ErrorCode::Config, c.where() + ": give either 'subjects' or 'split', not both");
  if (c.has("subjects")) return pick(rows, c.req<std::vector<std::string>>("subjects"), c.where());
  if (c.has("split")) {
    const Split s = read_split(c.path("split"));
    const auto subset = c.get<std::string>("subset", "test");
    if (subset == "train") return pick(rows, s.train, c.where());
    if (subset == "val") return pick(rows, s.val, c.where());
    if (subset == "test") return pick(rows, s.test, c.where());
    fail(ErrorCode::Config, c.where() + ": subset must be train, val or test");
  }
  if (c.has("subset")) fail(ErrorCode::Config, c.where() + ": 'subset' needs 'split'");
  return rows;
}

std::vector<trainkit::Subject> load_subjects(const std::vector<ManifestRow>& rows) {
  std::vector<trainkit::Subject> out;
  for (const auto& r : rows) {
    trainkit::Subject s{r.id, read_vvol(r.mri, Modality::MRI), read_vvol(r.pet, Modality::PET),
                        r.manufacturer};
    if (!(s.mri.dims() == s.pet.dims()))
      fail(ErrorCode::ShapeMismatch, "subject '" + r.id + "': MRI and PET dims differ");
    out.push_back(std::move(s));
  }
  return out;
}

void write_json(const ojson& j, const fs::path& path) {
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
}

fs::path out_dir(const Globals& g) {
  if (g.out.empty()) fail(ErrorCode::Config, "--out is required for this subcommand");
  return fs::path(g.out);
}

// ---- subcommands ---------------------------------------------------------

int cmd_gen_phantom(const Globals& g, const Config& c, std::ostream& out) {
  c.allow({"n_subjects", "dims", "hotspot_count", "hotspot_min", "hotspot_max", "hotspot_radius",
           "mri_imprint", "blob_sigma", "manufacturers"});
  trainkit::PhantomSpec spec;
  spec.seed = g.seed;
  spec.n_subjects = c.get<std::size_t>("n_subjects", spec.n_subjects);
  if (c.has("dims")) {
    const auto d = c.req<std::vector<std::size_t>>("dims");
    if (d.size() != 3) fail(ErrorCode::Config, c.where() + ": 'dims' needs three entries");
    spec.dims = {d[0], d[1], d[2]};
  }
  spec.hotspot_count = c.get<std::size_t>("hotspot_count", spec.hotspot_count);
  spec.hotspot_min = c.get<double>("hotspot_min", spec.hotspot_min);
  spec.hotspot_max = c.get<double>("hotspot_max", spec.hotspot_max);
  spec.hotspot_radius = c.get<double>("hotspot_radius", spec.hotspot_radius);
  spec.mri_imprint = c.get<double>("mri_imprint", spec.mri_imprint);
  spec.blob_sigma = c.get<double>("blob_sigma", spec.blob_sigma);
  if (c.has("manufacturers")) {
    spec.manufacturers.clear();
    for (const auto& m : c.at("manufacturers")) {
      if (!m.is_object()) fail(ErrorCode::Config, c.where() + ": manufacturers must be objects");
      for (const auto& [k, v] : m.items())
        if (k != "name" && k != "weight" && k != "scale" && k != "bias")
          fail(ErrorCode::Config, c.where() + ": unknown manufacturer key '" + k + "'");
      try {
        spec.manufacturers.push_back({m.at("name").get<std::string>(), m.value("weight", 1.0),
                                      m.value("scale", 1.0), m.value("bias", 0.0)});
      } catch (const json::exception& e) {
        fail(ErrorCode::Config, c.where() + ": manufacturer: " + e.what());
      }
    }
  }
  if (spec.n_subjects == 0) fail(ErrorCode::Config, "n_subjects must be positive");
  spec.validate();
  const fs::path dir = out_dir(g);

  const auto subjects = trainkit::gen_phantom(spec);
  fs::create_directories(dir / "mri");
  fs::create_directories(dir / "pet");
  std::vector<ManifestRow> rows;
  for (const auto& s : subjects) {
    ManifestRow r{s.id, s.manufacturer, dir / "mri" / (s.id + ".vvol"), dir / "pet" / (s.id + ".vvol")};
    write_vvol(s.mri, r.mri);
    write_vvol(s.pet, r.pet);
    rows.push_back(std::move(r));
  }
  write_manifest(rows, dir / "manifest.csv");
  out << "wrote " << rows.size() << " subjects to " << (dir / "manifest.csv").string() << "\n";
  return kExitOk;
}

int cmd_standardize(const Globals& g, const Config& c, std::ostream& out) {
  c.allow({"manifest", "train_subjects", "val_subjects", "n_train", "n_val", "epsilon", "mask_zero"});
  const auto rows = read_manifest(c.path("manifest"));
  stdz::FitOptions fit;
  fit.epsilon = c.get<double>("epsilon", fit.epsilon);
  fit.mask_zero = c.get<bool>("mask_zero", fit.mask_zero);

  Split split;
  if (c.has("train_subjects") == c.has("n_train"))
    fail(ErrorCode::Config, c.where() + ": give exactly one of 'train_subjects' or 'n_train'");
  if (c.has("train_subjects")) {
    split.train = c.req<std::vector<std::string>>("train_subjects");
    split.val = c.get<std::vector<std::string>>("val_subjects", {});
    pick(rows, split.train, c.where());
    pick(rows, split.val, c.where());
    std::set<std::string> used(split.train.begin(), split.train.end());
    for (const auto& v : split.val)
      if (!used.insert(v).second)
        fail(ErrorCode::Config, c.where() + ": subject '" + v + "' is in both train and val");
    for (const auto& r : rows)
      if (!used.contains(r.id)) split.test.push_back(r.id);
  } else {
    if (c.has("val_subjects")) fail(ErrorCode::Config, c.where() + ": 'val_subjects' needs 'train_subjects'");
    std::vector<trainkit::Subject> labels;
    for (const auto& r : rows) labels.push_back({r.id, {}, {}, r.manufacturer});
    const auto idx = trainkit::split_subjects(labels, c.req<std::size_t>("n_train"),
                                              c.get<std::size_t>("n_val", 0), g.seed);
    for (std::size_t i : idx.train) split.train.push_back(rows[i].id);
    for (std::size_t i : idx.val) split.val.push_back(rows[i].id);
    for (std::size_t i : idx.test) split.test.push_back(rows[i].id);
  }
  if (split.train.empty()) fail(ErrorCode::Config, c.where() + ": no training subjects");
  if (c.has("n_val") && !c.has("n_train")) fail(ErrorCode::Config, c.where() + ": 'n_val' needs 'n_train'");
  const fs::path dir = out_dir(g);

  std::vector<VolumeGrid> pet;
  for (const auto& r : rows) pet.push_back(read_vvol(r.pet, Modality::PET));
  std::vector<stdz::LabeledVolume> train_set;
  const std::set<std::string> train_ids(split.train.begin(), split.train.end());
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (train_ids.contains(rows[i].id)) train_set.push_back({pet[i], rows[i].manufacturer});
  const auto params = stdz::fit_params(train_set, fit);
  std::vector<VolumeGrid> standardized;
  for (std::size_t i = 0; i < rows.size(); ++i)
    standardized.push_back(stdz::apply_std(pet[i], rows[i].manufacturer, params));

  fs::create_directories(dir / "pet");
  std::vector<ManifestRow> out_rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ManifestRow r = rows[i];
    r.pet = dir / "pet" / (r.id + ".vvol");
    write_vvol(standardized[i], r.pet);
    out_rows.push_back(std::move(r));
  }
  stdz::save_params(params, dir / "std_params.json");
  write_manifest(out_rows, dir / "manifest.csv");
  write_split(split, dir / "split.json");
  out << "fitted " << params.manufacturers.size() << " manufacturers on " << split.train.size()
      << " subjects\n";
  return kExitOk;
}

trainkit::ValLossMode parse_val_loss(const std::string& s) {
  if (s == "combined") return trainkit::ValLossMode::Combined;
  if (s == "voxel_ssim") return trainkit::ValLossMode::VoxelSsim;
  fail(ErrorCode::Config, "val_loss must be 'combined' or 'voxel_ssim', got '" + s + "'");
}

nets::UNet3DConfig read_unet(const Config& c, nets::UNet3DConfig u) {
  u.channels = c.get<std::vector<std::size_t>>("channels", u.channels);
  u.dropout_p = c.get<double>("dropout", u.dropout_p);
  u.validate();
  return u;
}

int cmd_train(const Globals& g, const Config& c, std::ostream& out) {
  c.allow({"manifest", "split", "train_subjects", "val_subjects", "max_epochs", "patience",
           "lr_max", "cosine_period", "batch_size", "lambda", "perc_mode", "t0", "gamma",
           "early_stop", "val_loss", "augment", "channels", "dropout", "ssim_window",
           "baseline_plane", "extractor_2d", "extractor_3d"});
  const auto rows = read_manifest(c.path("manifest"));
  Split split;
  if (c.has("split") == c.has("train_subjects"))
    fail(ErrorCode::Config, c.where() + ": give exactly one of 'split' or 'train_subjects'");
  if (c.has("split")) {
    if (c.has("val_subjects")) fail(ErrorCode::Config, c.where() + ": 'val_subjects' conflicts with 'split'");
    split = read_split(c.path("split"));
  } else {
    split.train = c.req<std::vector<std::string>>("train_subjects");
    split.val = c.get<std::vector<std::string>>("val_subjects", {});
  }
  const auto train_rows = pick(rows, split.train, c.where());
  const auto val_rows = pick(rows, split.val, c.where());
  if (train_rows.empty()) fail(ErrorCode::Config, c.where() + ": no training subjects");
  if (val_rows.empty()) fail(ErrorCode::Config, c.where() + ": no validation subjects");

  trainkit::TrainConfig cfg;
  cfg.seed = g.seed;
  cfg.max_epochs = c.get<std::size_t>("max_epochs", cfg.max_epochs);
  cfg.patience = c.get<std::size_t>("patience", cfg.patience);
  cfg.lr_max = c.get<double>("lr_max", cfg.lr_max);
  cfg.cosine_period = c.get<std::size_t>("cosine_period", cfg.cosine_period);
  cfg.batch_size = c.get<std::size_t>("batch_size", cfg.batch_size);
  cfg.lambda = c.get<double>("lambda", cfg.lambda);
  if (c.has("perc_mode")) cfg.perc_mode = losses::parse_perc_mode(c.req<std::string>("perc_mode"));
  cfg.t0 = c.get<std::size_t>("t0", cfg.t0);
  cfg.gamma = c.get<double>("gamma", cfg.gamma);
  if (c.has("early_stop"))
    cfg.early_stop_mode = trainkit::parse_early_stop_mode(c.req<std::string>("early_stop"));
  if (c.has("val_loss")) cfg.val_loss = parse_val_loss(c.req<std::string>("val_loss"));
  cfg.augment = c.get<bool>("augment", cfg.augment);
  cfg.unet = read_unet(c, cfg.unet);
  cfg.ssim.window_size = c.get<std::size_t>("ssim_window", cfg.ssim.window_size);
  cfg.validate();

  auto pc = perc::default_perc_config();
  if (c.has("baseline_plane")) pc.baseline_plane = parse_plane(c.req<std::string>("baseline_plane"));
  if (c.has("extractor_2d"))
    pc.extractor_2d = std::make_shared<nets::FeatureExtractor>(nets::load_tiny_extractor(2, c.path("extractor_2d")));
  if (c.has("extractor_3d"))
    pc.extractor_3d = std::make_shared<nets::FeatureExtractor>(nets::load_tiny_extractor(3, c.path("extractor_3d")));
  pc.validate();
  const fs::path dir = out_dir(g);

  const auto train_set = load_subjects(train_rows);
  const auto val_set = load_subjects(val_rows);
  fs::create_directories(dir);
  const auto result = trainkit::train(cfg, pc, train_set, val_set, dir, [&](const trainkit::EpochRecord& e) {
    out << "epoch " << e.epoch << " " << e.plane << " train " << format_number(e.train_loss) << " val "
        << format_number(e.val_loss) << " val_ssim " << format_number(e.val_ssim) << "\n";
  });
  ojson model;
  model["channels"] = cfg.unet.channels;
  model["dropout"] = cfg.unet.dropout_p;
  model["checkpoint"] = "best.cpwt";
  write_json(model, dir / "model.json");
  out << "best epoch " << result.best_epoch << (result.early_stopped ? " (early stop)" : "") << "\n";
  return kExitOk;
}

// Generated/truth pairs from a pairs CSV or from a trained model run over a
// manifest. Model predictions are written under <out>/pred.
struct Prediction {
  std::string id;
  VolumeGrid volume;
  fs::path truth;
};

struct PairSource {
  std::vector<evalstat::EvalPair> pairs;
  std::vector<Prediction> predictions;
};

PairSource load_pairs(const Config& c) {
  PairSource src;
  if (c.has("pairs") == c.has("model"))
    fail(ErrorCode::Config, c.where() + ": give exactly one of 'pairs' or 'model'");
  if (c.has("pairs")) {
    for (const char* k : {"manifest", "subjects", "split", "subset"})
      if (c.has(k)) fail(ErrorCode::Config, c.where() + ": '" + k + "' applies to 'model' only");
    const fs::path path = c.path("pairs");
    const CsvTable t = read_csv(path);
    const std::size_t ci = t.column("subject"), cg = t.column("generated"), ct = t.column("truth");
    const fs::path dir = fs::absolute(path).parent_path();
    std::set<std::string> seen;
    for (const auto& r : t.rows) {
      if (!seen.insert(r[ci]).second)
        fail(ErrorCode::DuplicateName, path.string() + ": subject '" + r[ci] + "' listed twice");
      src.pairs.push_back({r[ci], read_vvol(dir / r[cg]), read_vvol(dir / r[ct])});
    }
  } else {
    const Config model = Config::load(c.path("model").string());
    model.allow({"channels", "dropout", "checkpoint"});
    const auto unet = read_unet(model, {});
    const auto weights = nets::load_weights(model.path("checkpoint"));
    const auto params = nets::to_params<float>(weights, false);
    const auto rows = select_subjects(c, read_manifest(c.path("manifest")));
    const auto subjects = load_subjects(rows);
    for (std::size_t i = 0; i < subjects.size(); ++i) {
      VolumeGrid gen = trainkit::predict(params, unet, subjects[i].mri);
      src.predictions.push_back({subjects[i].id, gen, rows[i].pet});
      src.pairs.push_back({subjects[i].id, std::move(gen), subjects[i].pet});
    }
  }
  if (src.pairs.empty()) fail(ErrorCode::UnpairedSubjects, c.where() + ": no subject pairs");
  return src;
}

void write_predictions(const PairSource& src, const fs::path& dir) {
  if (src.predictions.empty()) return;
  fs::create_directories(dir / "pred");
  CsvTable t;
  t.header = {"subject", "generated", "truth"};
  for (const auto& p : src.predictions) {
    write_vvol(p.volume, dir / "pred" / (p.id + ".vvol"));
    t.rows.push_back({p.id, "pred/" + p.id + ".vvol", relative_to(p.truth, dir).generic_string()});
  }
  write_csv(t, dir / "pairs.csv");
}

int cmd_eval(const Globals& g, const Config& c, std::ostream& out) {
  c.allow({"pairs", "model", "manifest", "subjects", "split", "subset", "ssim_window", "stem"});
  losses::SsimConfig sc;
  sc.window_size = c.get<std::size_t>("ssim_window", sc.window_size);
  sc.validate();
  const auto stem = c.get<std::string>("stem", "metrics");
  if (stem.empty() || stem.find_first_of("/\\") != std::string::npos)
    fail(ErrorCode::Config, c.where() + ": 'stem' must be a plain file name");
  const fs::path dir = out_dir(g);
  const auto src = load_pairs(c);
  const auto report = evalstat::metrics_report(src.pairs, sc);
  fs::create_directories(dir);
  write_predictions(src, dir);
  evalstat::write_metrics_report(report, dir, stem);
  for (const auto& [name, agg] : report.summary)
    if (name == "ssim3d" || name == "psnr3d")
      out << name << " mean " << format_number(agg.mean) << " sd " << format_number(agg.sd) << "\n";
  return kExitOk;
}

int cmd_roi(const Globals& g, const Config& c, std::ostream& out) {
  c.allow({"pairs", "model", "manifest", "subjects", "split", "subset", "labels"});
  const fs::path labels_path = c.path("labels");
  const fs::path dir = out_dir(g);
  const auto labels = evalstat::labels_from_volume(read_vvol(labels_path));
  const auto src = load_pairs(c);
  const auto table = evalstat::roi_table(src.pairs, labels);
  fs::create_directories(dir);
  write_csv(evalstat::roi_csv(table), dir / "roi.csv");
  out << "wrote " << table.rows.size() << " ROI rows\n";
  return kExitOk;
}

int cmd_stats(const Globals& g, const Config& c, std::ostream& out) {
  c.allow({"a", "b", "contrast", "alpha", "normality_alpha"});
  evalstat::CompareOptions opt;
  opt.alpha = c.get<double>("alpha", opt.alpha);
  opt.normality_alpha = c.get<double>("normality_alpha", opt.normality_alpha);
  if (!(opt.alpha > 0 && opt.alpha < 1) || !(opt.normality_alpha > 0 && opt.normality_alpha < 1))
    fail(ErrorCode::Config, c.where() + ": alpha levels must be in (0, 1)");
  const auto contrast = c.get<std::string>("contrast", "a_vs_b");
  const auto a = evalstat::read_method_table(c.path("a"));
  const auto b = evalstat::read_method_table(c.path("b"));
  const fs::path dir = out_dir(g);
  const auto rows = evalstat::compare_methods(contrast, a, b, opt);
  fs::create_directories(dir);
  write_csv(evalstat::stat_csv(rows), dir / "stats.csv");
  const auto sig = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.significant; });
  out << rows.size() << " endpoints, " << sig << " significant after BH\n";
  return kExitOk;
}

int cmd_gradcheck(std::ostream& out) {
  bool ok = true;
  for (const auto& r : run_gradient_suite()) {
    const bool pass = r.error < kGradTolerance;
    ok = ok && pass;
    out << (pass ? "PASS " : "FAIL ") << r.name << " seed " << r.seed << " error "
        << format_number(r.error) << "\n";
  }
  return ok ? kExitOk : kExitNumerical;
}

int exit_code(ErrorCode code) {
  switch (classify(code)) {
    case ErrorClass::Config: return kExitConfig;
    case ErrorClass::Data: return kExitData;
    case ErrorClass::Numerical: return kExitNumerical;
  }
  return kExitData;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cyclic perceptual-loss PET synthesis toolkit", "cycpl"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random draw")->default_val(0);
  app.add_option("--threads", g.threads, "BLAS worker threads (1 = reference mode)")
      ->default_val(1)
      ->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");

  std::string config;
  const auto sub = [&](const char* name, const char* help, bool needs_config) {
    CLI::App* s = app.add_subcommand(name, help);
    auto* o = s->add_option("--config", config, "JSON config file");
    if (needs_config) o->required();
    return s;
  };
  CLI::App* gen = sub("gen-phantom", "Write a seeded phantom dataset and manifest", false);
  CLI::App* stdz_cmd = sub("standardize", "Fit per-manufacturer PET standardization", true);
  CLI::App* train_cmd = sub("train", "Train the U-Net generator", true);
  CLI::App* eval_cmd = sub("eval", "Metrics report for generated vs truth pairs", true);
  CLI::App* roi_cmd = sub("roi", "ROI table for generated vs truth pairs", true);
  CLI::App* stats_cmd = sub("stats", "Paired tests between two metric reports", true);
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Run the gradient-check suite");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    set_num_threads(g.threads);
    if (grad_cmd->parsed()) return cmd_gradcheck(out);
    const Config c = Config::load(config);
    if (gen->parsed()) return cmd_gen_phantom(g, c, out);
    if (stdz_cmd->parsed()) return cmd_standardize(g, c, out);
    if (train_cmd->parsed()) return cmd_train(g, c, out);
    if (eval_cmd->parsed()) return cmd_eval(g, c, out);
    if (roi_cmd->parsed()) return cmd_roi(g, c, out);
    if (stats_cmd->parsed()) return cmd_stats(g, c, out);
  } catch (const Error& e) {
    err << "cycpl: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const json::exception& e) {
    err << "cycpl: config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "cycpl: " << e.what() << "\n";
    return kExitData;
  }
  return kExitConfig;
}

}  // namespace cycpl::cli
