#include <cmath>

#include "cycpl/standardize.hpp"
#include "cycpl/trainkit/phantom.hpp"
#include "test_util.hpp"

using namespace cycpl;
using namespace cycpl::stdz;
using testutil::error_code_of;

namespace {

std::pair<double, double> pooled(std::span<const LabeledVolume> vs, const std::string& m) {
  double s = 0, n = 0;
  for (const auto& v : vs)
    if (v.manufacturer == m)
      for (float x : v.volume.data()) s += x, n += 1;
  const double mean = s / n;
  double ss = 0;
  for (const auto& v : vs)
    if (v.manufacturer == m)
      for (float x : v.volume.data()) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / n)};
}

std::vector<LabeledVolume> phantom_set(std::uint64_t seed, std::size_t n) {
  trainkit::PhantomSpec spec;
  spec.n_subjects = n;
  spec.dims = {8, 8, 8};
  spec.seed = seed;
  std::vector<LabeledVolume> out;
  for (auto& s : trainkit::gen_phantom(spec)) out.push_back({s.pet, s.manufacturer});
  return out;
}

}  // namespace

TEST_CASE("fit on a hand example") {
  const std::vector<LabeledVolume> one{{VolumeGrid({1, 1, 3}, {1, 2, 3}), "A"}};
  const auto p = fit_params(one);
  CHECK(p.manufacturers.at("A").mean == doctest::Approx(2.0));
  CHECK(p.manufacturers.at("A").std == doctest::Approx(0.8164966).epsilon(1e-6));
  const auto z = apply_std(VolumeGrid({1, 1, 2}, {3, 2}), "A", p);
  CHECK(z.data()[0] == doctest::Approx(1.2247449).epsilon(1e-6));
  CHECK(z.data()[1] == 0.0f);
  CHECK(error_code_of([&] { apply_std(one[0].volume, "B", p); }) == ErrorCode::UnknownManufacturer);
  FitOptions opt;
  opt.expected = {"A", "B"};
  CHECK(error_code_of([&] { fit_params(one, opt); }) == ErrorCode::EmptyManufacturer);
  const std::vector<LabeledVolume> flat{{VolumeGrid::filled({2, 2, 2}, 4.0f), "C"}};
  const auto pf = fit_params(flat);
  CHECK(pf.manufacturers.at("C").std == 0.0);
  const auto zf = apply_std(flat[0].volume, "C", pf);
  for (float v : zf.data()) CHECK(v == 0.0f);
}

TEST_CASE("standardized training subset has zero mean and near-unit spread") {
  const auto train = phantom_set(3, 9);
  const auto p = fit_params(train);
  std::vector<LabeledVolume> z;
  for (const auto& t : train) z.push_back({apply_std(t.volume, t.manufacturer, p), t.manufacturer});
  for (const auto& [m, st] : p.manufacturers) {
    const auto [mean, sd] = pooled(z, m);
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(sd - st.std / (st.std + p.epsilon)) < 1e-6);
    const auto [raw_mean, raw_sd] = pooled(train, m);
    CHECK(st.mean == doctest::Approx(raw_mean).epsilon(1e-12));
    CHECK(st.std == doctest::Approx(raw_sd).epsilon(1e-12));
  }
  for (const auto& t : train) {
    const auto back = invert_std(apply_std(t.volume, t.manufacturer, p), t.manufacturer, p);
    for (std::size_t i = 0; i < back.size(); ++i)
      CHECK(std::abs(back.data()[i] - t.volume.data()[i]) <= 1e-6 * std::max(1.0f, std::abs(t.volume.data()[i])));
  }
}

TEST_CASE("manufacturer partitions and leakage") {
  auto train = phantom_set(4, 6);
  const auto p = fit_params(train);
  const auto frozen = p;
  const auto held_out = phantom_set(5, 6);
  for (const auto& h : held_out) (void)apply_std(h.volume, h.manufacturer, p);
  CHECK(p == frozen);

  const std::string m1 = train[0].manufacturer;
  for (auto& t : train)
    if (t.manufacturer == m1) t.volume = VolumeGrid::filled(t.volume.dims(), 9.0f);
  const auto p2 = fit_params(train);
  for (const auto& [m, st] : p.manufacturers)
    if (m != m1) CHECK(p2.manufacturers.at(m) == st);
}

TEST_CASE("rank order preserved") {
  const auto v = testutil::random_volume({4, 4, 4}, 9);
  const std::vector<LabeledVolume> set{{v, "S"}};
  const auto z = apply_std(v, "S", fit_params(set));
  for (std::size_t i = 1; i < v.size(); ++i)
    CHECK((v.data()[i] < v.data()[i - 1]) == (z.data()[i] < z.data()[i - 1]));
}

TEST_CASE("params JSON round trip and errors") {
  const auto dir = testutil::scratch_dir("stdz");
  ManufacturerParams p;
  p.fitted_on = "fnv1a64:0123456789abcdef";
  p.manufacturers["GE"] = {0.1 + 0.2, 1.0 / 3.0};
  p.manufacturers["Siemens"] = {-2.5e-7, 12345.678901234567};
  save_params(p, dir / "p.json");
  CHECK(load_params(dir / "p.json") == p);
  CHECK(params_from_json(R"({"fitted_on":"x","manufacturers":{"A":{"mean":1,"std":2}}})").epsilon == 1e-8);
  CHECK(error_code_of([] { params_from_json(R"({"fitted_on":"x","manufacturers":{"A":{"mean":1}}})"); }) ==
        ErrorCode::MissingField);
  CHECK(error_code_of([] { params_from_json("{not json"); }) == ErrorCode::ParseError);
  const auto train = phantom_set(6, 3);
  CHECK(fit_params(train).fitted_on == fingerprint(train));
  CHECK(fingerprint(train).starts_with("fnv1a64:"));
}
