#include "cycpl/standardize.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cycpl/error.hpp"
#include "cycpl/rng.hpp"
#include "json.hpp"

namespace cycpl::stdz {

namespace {

const ManufacturerStats& lookup(const ManufacturerParams& p, const std::string& m) {
  auto it = p.manufacturers.find(m);
  if (it == p.manufacturers.end())
    fail(ErrorCode::UnknownManufacturer, "no standardization parameters for manufacturer '" + m + "'");
  return it->second;
}

}  // namespace

ManufacturerParams fit_params(std::span<const LabeledVolume> train, const FitOptions& opt) {
  if (!(opt.epsilon >= 0.0)) fail(ErrorCode::InvalidAttribute, "epsilon must be >= 0");
  std::map<std::string, std::vector<const VolumeGrid*>> groups;
  for (const auto& e : opt.expected) groups[e];
  for (const auto& lv : train) groups[lv.manufacturer].push_back(&lv.volume);

  ManufacturerParams p;
  p.epsilon = opt.epsilon;
  p.fitted_on = fingerprint(train);
  for (const auto& [name, vols] : groups) {
    double total = 0.0;
    std::size_t count = 0;
    for (const VolumeGrid* v : vols)
      for (float x : v->data())
        if (!opt.mask_zero || x != 0.0f) {
          total += x;
          ++count;
        }
    if (count == 0)
      fail(ErrorCode::EmptyManufacturer, "no training voxels for manufacturer '" + name + "'");
    const double mean = total / static_cast<double>(count);
    double ss = 0.0;
    for (const VolumeGrid* v : vols)
      for (float x : v->data())
        if (!opt.mask_zero || x != 0.0f) ss += (x - mean) * (x - mean);
    p.manufacturers[name] = {mean, std::sqrt(ss / static_cast<double>(count))};
  }
  return p;
}

VolumeGrid apply_std(const VolumeGrid& y, const std::string& manufacturer,
                     const ManufacturerParams& p) {
  const auto& s = lookup(p, manufacturer);
  const double scale = s.std + p.epsilon;
  if (!(scale > 0.0))
    fail(ErrorCode::DegenerateRange, "manufacturer '" + manufacturer + "' has zero spread and epsilon 0");
  std::vector<float> out(y.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>((y.data()[i] - s.mean) / scale);
  return VolumeGrid(y.dims(), std::move(out), y.modality());
}

VolumeGrid invert_std(const VolumeGrid& y, const std::string& manufacturer,
                      const ManufacturerParams& p) {
  const auto& s = lookup(p, manufacturer);
  std::vector<float> out(y.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<float>(y.data()[i] * (s.std + p.epsilon) + s.mean);
  return VolumeGrid(y.dims(), std::move(out), y.modality());
}

std::string fingerprint(std::span<const LabeledVolume> volumes) {
  Fnv1a h;
  for (const auto& lv : volumes) {
    const std::uint64_t dims[3] = {lv.volume.dims().d, lv.volume.dims().h, lv.volume.dims().w};
    h.update(dims, sizeof dims);
    h.update(lv.volume.data().data(), lv.volume.size() * sizeof(float));
    h.update(lv.manufacturer.data(), lv.manufacturer.size());
    h.update("\0", 1);
  }
  std::ostringstream os;
  os << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << h.digest();
  return os.str();
}

std::string params_to_json(const ManufacturerParams& p) {
  nlohmann::ordered_json j;
  j["epsilon"] = p.epsilon;
  j["fitted_on"] = p.fitted_on;
  j["manufacturers"] = nlohmann::ordered_json::object();
  for (const auto& [name, s] : p.manufacturers)
    j["manufacturers"][name] = {{"mean", s.mean}, {"std", s.std}};
  return j.dump(2) + "\n";
}

ManufacturerParams params_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("standardization params: ") + e.what());
  }
  const auto number = [](const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) fail(ErrorCode::MissingField, where + " is missing \"" + key + "\"");
    if (!obj[key].is_number()) fail(ErrorCode::ParseError, where + ": \"" + key + "\" is not a number");
    return obj[key].get<double>();
  };
  if (!j.is_object()) fail(ErrorCode::ParseError, "standardization params must be a JSON object");
  ManufacturerParams p;
  if (j.contains("epsilon")) p.epsilon = number(j, "epsilon", "params");
  if (j.contains("fitted_on")) {
    if (!j["fitted_on"].is_string()) fail(ErrorCode::ParseError, "\"fitted_on\" is not a string");
    p.fitted_on = j["fitted_on"].get<std::string>();
  }
  if (!j.contains("manufacturers")) fail(ErrorCode::MissingField, "params is missing \"manufacturers\"");
  if (!j["manufacturers"].is_object()) fail(ErrorCode::ParseError, "\"manufacturers\" is not an object");
  for (const auto& [name, v] : j["manufacturers"].items()) {
    if (!v.is_object()) fail(ErrorCode::ParseError, "manufacturer '" + name + "' is not an object");
    const std::string where = "manufacturer '" + name + "'";
    p.manufacturers[name] = {number(v, "mean", where), number(v, "std", where)};
  }
  return p;
}

void save_params(const ManufacturerParams& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
  out << params_to_json(p);
  if (!out) fail(ErrorCode::Io, "short write to " + path.string());
}

ManufacturerParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return params_from_json(ss.str());
}

}  // namespace cycpl::stdz
