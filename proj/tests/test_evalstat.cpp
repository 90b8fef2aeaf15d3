#include <cmath>
#include <limits>
#include <numeric>

#include "cycpl/evalstat/metrics.hpp"
#include "cycpl/evalstat/report_io.hpp"
#include "cycpl/evalstat/roi.hpp"
#include "cycpl/evalstat/stats.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cycpl;
using namespace cycpl::evalstat;
using testutil::error_code_of;
using testutil::random_volume;

namespace {

/// Inverse normal CDF by bisection on erfc.
struct NormalQuantile {
  double operator()(double q) const {
    double lo = -10, hi = 10;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (0.5 * std::erfc(-mid / std::sqrt(2.0)) < q ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }
};

VolumeGrid offset(const VolumeGrid& v, float c) {
  std::vector<float> o(v.data().begin(), v.data().end());
  for (auto& x : o) x += c;
  return VolumeGrid(v.dims(), o);
}

}  // namespace

TEST_CASE("psnr, mae and nmae examples") {
  const auto y = VolumeGrid::filled({2, 2, 2}, 1.0f);
  CHECK(psnr(VolumeGrid::filled({2, 2, 2}, 1.5f), y) == doctest::Approx(6.0206).epsilon(1e-4));
  CHECK(std::isinf(psnr(y, y)));
  std::vector<float> two(8, 0.0f);
  two[0] = 2.0f;
  const VolumeGrid y2({2, 2, 2}, two);
  std::vector<float> off(two);
  for (auto& v : off) v += 0.1f;
  CHECK(psnr(VolumeGrid({2, 2, 2}, off), y2) == doctest::Approx(26.0206).epsilon(1e-4));
  const VolumeGrid a({1, 1, 3}, {1, 2, 3}), b({1, 1, 3}, {1, 1, 3});
  CHECK(mae(a, b) == doctest::Approx(1.0 / 3));
  CHECK(mae(a, a) == 0.0);
  CHECK(nmae(a, b) == doctest::Approx(1.0 / 6));
  CHECK(nmae(a, a) == 0.0);
  CHECK(error_code_of([&] { nmae(a, y); }) == ErrorCode::ShapeMismatch);
  CHECK(error_code_of([&] { nmae(VolumeGrid({1, 1, 2}, {1, 2}), VolumeGrid({1, 1, 2}, {3, 3})); }) ==
        ErrorCode::DegenerateRange);
  const auto base = random_volume({6, 6, 6}, 1);
  double prev = std::numeric_limits<double>::infinity();
  for (float amp : {0.01f, 0.05f, 0.1f, 0.5f, 1.0f}) {
    const double p = psnr(offset(base, amp), base);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("metrics match loop oracles") {
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
    CHECK(std::abs(psnr(g, t) - 10 * std::log10(mx * mx / (se / n))) <= 1e-7);
    CHECK(std::abs(mae(g, t) - ae / n) <= 1e-7);
    CHECK(std::abs(nmae(g, t) - ae / n / (mx - mn)) <= 1e-7);
  }
}

TEST_CASE("metrics report") {
  const auto t = random_volume({16, 16, 16}, 3);
  const std::vector<EvalPair> same{{"s1", t, t}};
  const auto r = metrics_report(same);
  REQUIRE(r.subjects.size() == 1);
  CHECK(r.subjects[0].ssim3d == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.subjects[0].mae3d == 0.0);
  for (const auto& p : r.subjects[0].plane) CHECK(p.ssim == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<EvalPair> three;
  for (std::uint64_t s = 0; s < 3; ++s)
    three.push_back({"s" + std::to_string(s), offset(random_volume({16, 16, 16}, 40 + s), 0.0f),
                     random_volume({16, 16, 16}, 50 + s)});
  for (auto& p : three) p.generated = offset(p.truth, 0.05f * static_cast<float>(p.id.back() - '0' + 1));
  const auto rep = metrics_report(three);
  const auto names = metric_names();
  REQUIRE(rep.summary.size() == names.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<double> vals;
    for (const auto& s : rep.subjects) vals.push_back(s.flatten()[k].second);
    const double mean = (vals[0] + vals[1] + vals[2]) / 3;
    double ss = 0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    CHECK(rep.summary[k].first == names[k]);
    CHECK(rep.summary[k].second.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(rep.summary[k].second.sd == doctest::Approx(std::sqrt(ss / 2)).epsilon(1e-12));
  }
}

TEST_CASE("plane-wise metrics see anisotropic errors") {
  const auto t = random_volume({16, 16, 16}, 60);
  std::vector<float> g(t.data().begin(), t.data().end());
  // Error confined to a band of axial slices inside the evaluation window.
  for (std::size_t d = 4; d < 7; ++d)
    for (std::size_t i = 0; i < 256; ++i) g[d * 256 + i] += 0.8f * std::sin(0.37f * static_cast<float>(i));
  const auto s = subject_metrics({"x", VolumeGrid(t.dims(), g), t});
  CHECK(std::abs(s.plane[0].ssim - s.ssim3d) > 1e-3);
  CHECK(std::abs(s.plane[0].ssim - s.plane[2].ssim) > 1e-3);

  // Identical permutations of both volumes keep mae3d but move plane metrics.
  const auto u = random_volume({16, 16, 16}, 61);
  std::vector<std::size_t> perm(u.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(5);
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
  std::vector<float> pg(u.size()), pt(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) pg[i] = g[perm[i]], pt[i] = t.data()[perm[i]];
  const auto a = subject_metrics({"a", VolumeGrid(t.dims(), g), t});
  const auto b = subject_metrics({"b", VolumeGrid(t.dims(), pg), VolumeGrid(t.dims(), pt)});
  CHECK(a.mae3d == doctest::Approx(b.mae3d).epsilon(1e-9));
  CHECK(std::abs(a.plane[0].ssim - b.plane[0].ssim) > 1e-3);
}

TEST_CASE("roi statistics") {
  std::vector<int> lab(8, 0);
  lab[1] = 1, lab[6] = 1;
  const LabelMap lm{{2, 2, 2}, lab};
  std::vector<float> v(8, 9.0f);
  v[1] = 1, v[6] = 3;
  CHECK(roi_mean(VolumeGrid({2, 2, 2}, v), lm, 1) == doctest::Approx(2.0));
  CHECK(error_code_of([&] { roi_mean(VolumeGrid({2, 2, 2}, v), lm, 2); }) == ErrorCode::EmptyRoi);
  const LabelMap all{{2, 2, 2}, std::vector<int>(8, 4)};
  const auto r = random_volume({2, 2, 2}, 1);
  double gm = 0;
  for (float x : r.data()) gm += x;
  CHECK(roi_mean(r, all, 4) == doctest::Approx(gm / 8));

  const auto t1 = VolumeGrid::filled({2, 2, 2}, 1.0f), t2 = VolumeGrid::filled({2, 2, 2}, 2.0f);
  std::vector<EvalPair> pairs{{"a", offset(t1, 0.1f), t1}, {"b", offset(t2, -0.3f), t2}};
  CHECK(roi_mse(pairs, all, 4) == doctest::Approx(0.05).epsilon(1e-6));
  std::swap(pairs[0], pairs[1]);
  CHECK(roi_mse(pairs, all, 4) == doctest::Approx(0.05).epsilon(1e-6));
  std::vector<EvalPair> perfect{{"a", t1, t1}};
  CHECK(roi_mse(perfect, all, 4) == 0.0);

  // Masked-loop oracle on random labels.
  Rng rng(3);
  std::vector<int> rl(512);
  for (auto& x : rl) x = static_cast<int>(rng.below(4));
  const LabelMap rlm{{8, 8, 8}, rl};
  std::vector<EvalPair> rp;
  for (std::uint64_t s = 0; s < 3; ++s) rp.push_back({"s", random_volume({8, 8, 8}, 70 + s), random_volume({8, 8, 8}, 80 + s)});
  for (int roi : rlm.rois()) {
    double acc = 0;
    for (const auto& p : rp) {
      double sg = 0, st = 0, n = 0;
      for (std::size_t i = 0; i < 512; ++i)
        if (rl[i] == roi) sg += p.generated.data()[i], st += p.truth.data()[i], n += 1;
      acc += (sg / n - st / n) * (sg / n - st / n);
    }
    CHECK(std::abs(roi_mse(rp, rlm, roi) - acc / 3) <= 1e-7);
  }
  CHECK(rlm.rois() == std::vector<int>{1, 2, 3});
  CHECK(error_code_of([] { labels_from_volume(VolumeGrid({1, 1, 2}, {0.5f, 1.0f})); }) == ErrorCode::ParseError);
  CHECK(error_code_of([] { labels_from_volume(VolumeGrid({1, 1, 2}, {-1.0f, 1.0f})); }) == ErrorCode::ParseError);
  const auto table = roi_table(rp, rlm);
  CHECK(table.rows.size() == 3);
  CHECK(roi_csv(table).rows.size() == 9);
}

TEST_CASE("Shapiro-Wilk against reference values") {
  const auto& refs = oracle::shapiro_refs();
  for (const auto& r : refs) {
    INFO("n = " << r.x.size());
    const auto sw = shapiro_wilk(r.x);
    CHECK(std::abs(sw.w - r.w) <= 1e-3);
    CHECK(std::abs(sw.p - r.p) <= 1e-3);
  }
  CHECK(shapiro_wilk(refs[1].x).p < 0.05);
  CHECK(error_code_of([] { shapiro_wilk(std::vector<double>{1, 1, 1, 1}); }) == ErrorCode::DegenerateSample);
  CHECK(error_code_of([] { shapiro_wilk(std::vector<double>{1, 2}); }) == ErrorCode::DegenerateSample);
}

TEST_CASE("Shapiro-Wilk on normal scores") {
  // Reference W of Blom scores from scipy.stats.shapiro; the statistic is
  // affine invariant, so 3x + 7 must agree as well.
  const std::pair<std::size_t, double> refs[] = {
      {5, 0.9974502528}, {12, 0.9965868283}, {30, 0.9977832115}, {50, 0.9984740698}};
  for (const auto& [n, w_ref] : refs) {
    std::vector<double> x, y;
    const NormalQuantile q;
    for (std::size_t i = 1; i <= n; ++i) {
      const double z = q((static_cast<double>(i) - 0.375) / (static_cast<double>(n) + 0.25));
      x.push_back(z);
      y.push_back(3.0 * z + 7.0);
    }
    const double w = shapiro_wilk(x).w;
    CHECK(std::abs(w - w_ref) <= 1e-3);
    CHECK(std::abs(shapiro_wilk(y).w - w) <= 1e-12);
    CHECK(w > 0.995);
    CHECK(shapiro_wilk(x).p > 0.99);
  }
}

TEST_CASE("paired t against reference values") {
  const auto& refs = oracle::paired_t_refs();
  for (const auto& r : refs) {
    const auto res = paired_t_one_sided(r.d, r.dir);
    CHECK(std::abs(res.statistic - r.t) <= 1e-6);
    CHECK(std::abs(res.p - r.p) <= 1e-6);
    std::vector<double> neg;
    for (double v : r.d) neg.push_back(-v);
    const auto flipped = paired_t_one_sided(neg, r.dir == Direction::Greater ? Direction::Less : Direction::Greater);
    CHECK(std::abs(flipped.p - res.p) <= 1e-12);
  }
  CHECK(paired_t_one_sided(std::vector<double>{-1, 1, -2, 2}, Direction::Greater).p == doctest::Approx(0.5));
  CHECK(error_code_of([] { paired_t_one_sided(std::vector<double>{1, 1, 1}, Direction::Greater); }) ==
        ErrorCode::DegenerateSample);
}

TEST_CASE("Wilcoxon signed rank") {
  const auto a = wilcoxon_one_sided(std::vector<double>{1.2, 0.8, -0.3, 2.0, 0.5}, Direction::Greater);
  CHECK(a.statistic == 14.0);
  CHECK(a.p == doctest::Approx(2.0 / 32).epsilon(1e-12));
  const auto b = wilcoxon_one_sided(std::vector<double>{1, 2, 3, 4, 5}, Direction::Greater);
  CHECK(b.statistic == 15.0);
  CHECK(b.p == doctest::Approx(1.0 / 32).epsilon(1e-12));
  const std::vector<double> d{0.4, -1.1, 2.2, 0.9, 0.0, 3.1};
  std::vector<double> nd;
  for (double v : d) nd.push_back(-v);
  CHECK(wilcoxon_one_sided(d, Direction::Greater).p == wilcoxon_one_sided(nd, Direction::Less).p);
  CHECK(error_code_of([] { wilcoxon_one_sided(std::vector<double>{0, 0}, Direction::Greater); }) ==
        ErrorCode::AllZeroDifferences);
  // Ties (average ranks) against enumeration.
  const std::vector<double> tied{1, 2, 2, -3, 4, 4, -5, 6};
  CHECK(wilcoxon_one_sided(tied, Direction::Greater).statistic == 25.0);
  CHECK(wilcoxon_one_sided(tied, Direction::Greater).p == doctest::Approx(oracle::wilcoxon_enumerated(tied, Direction::Greater)).epsilon(1e-12));

  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> x(n);
    for (auto& v : x) v = std::round(rng.normal(0.3, 1.0) * 4) / 4;  // coarse grid: ties and zeros
    if (std::all_of(x.begin(), x.end(), [](double v) { return v == 0; })) x[0] = 0.25;
    for (Direction dir : {Direction::Greater, Direction::Less})
      CHECK(wilcoxon_one_sided(x, dir).p == doctest::Approx(oracle::wilcoxon_enumerated(x, dir)).epsilon(1e-12));
  }
  // Large-sample branch stays close to the exact distribution's mean behaviour.
  std::vector<double> big;
  for (int i = 1; i <= 40; ++i) big.push_back(i % 3 == 0 ? -i : i);
  const auto lb = wilcoxon_one_sided(big, Direction::Greater);
  CHECK(lb.p > 0.0);
  CHECK(lb.p < 0.05);
}

TEST_CASE("Benjamini-Hochberg") {
  const auto adj = bh_adjust(std::vector<double>{0.01, 0.02, 0.04});
  CHECK(adj[0] == doctest::Approx(0.03));
  CHECK(adj[1] == doctest::Approx(0.03));
  CHECK(adj[2] == doctest::Approx(0.04));
  CHECK(bh_adjust(std::vector<double>{0.2})[0] == 0.2);
  for (double p : bh_adjust(std::vector<double>{0.3, 0.3, 0.3})) CHECK(p == doctest::Approx(0.3));
  CHECK(error_code_of([] { bh_adjust(std::vector<double>{1.5}); }) == ErrorCode::OutOfRange);
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> p(1 + rng.below(10));
    for (auto& v : p) v = rng.uniform();
    const auto a = bh_adjust(p);
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto i, auto j) { return p[i] < p[j]; });
    for (std::size_t k = 0; k < p.size(); ++k) {
      CHECK(a[k] >= p[k]);
      CHECK(a[k] <= 1.0);
      if (k > 0) CHECK(a[idx[k]] >= a[idx[k - 1]]);
    }
  }
}

TEST_CASE("method comparison") {
  MethodTable a, b;
  Rng rng(8);
  for (int s = 0; s < 10; ++s) {
    const std::string id = "sub-" + std::to_string(s);
    for (const auto& m : metric_names()) b[id][m] = rng.uniform(0.5, 0.9);
    a[id] = b[id];
  }
  for (const auto& r : compare_methods("self", a, b)) {
    CHECK(!r.significant);
    CHECK(r.p_raw >= 0.5 - 1e-12);
  }

  auto shifted = b;
  for (auto& [id, vals] : shifted) vals["ssim3d"] += 0.1;
  const auto rows = compare_methods("shift", shifted, b);
  for (const auto& r : rows)
    if (r.endpoint == "ssim3d") {
      CHECK(r.test == TestKind::Wilcoxon);
      CHECK(r.direction == Direction::Greater);
      CHECK(r.p_raw < 0.01);
      CHECK(r.family == "ssim");
    }
  CHECK(endpoint_family("ssim_axial") == "ssim");
  CHECK(endpoint_family("nmae3d") == "nmae");
  CHECK(endpoint_direction("mae") == Direction::Less);
  CHECK(endpoint_direction("psnr") == Direction::Greater);

  // Per-family BH: moving the ssim family leaves the mae family untouched.
  auto noisy_a = b;
  for (auto& [id, vals] : noisy_a)
    for (auto& [m, v] : vals) v += rng.normal(0.02, 0.05);
  auto noisy_b = noisy_a;
  for (auto& [id, vals] : noisy_b) vals["ssim_axial"] += rng.normal(0.3, 0.01);
  const auto r1 = compare_methods("c", noisy_a, b), r2 = compare_methods("c", noisy_b, b);
  for (std::size_t i = 0; i < r1.size(); ++i)
    if (r1[i].family != "ssim") CHECK(r1[i].p_adj == r2[i].p_adj);

  auto missing = b;
  missing.erase(missing.begin());
  CHECK(error_code_of([&] { compare_methods("x", a, missing); }) == ErrorCode::UnpairedSubjects);
}

TEST_CASE("report round trip through CSV") {
  std::vector<EvalPair> pairs;
  for (std::uint64_t s = 0; s < 2; ++s) {
    const auto t = random_volume({16, 16, 16}, 90 + s);
    pairs.push_back({"sub-" + std::to_string(s), s == 0 ? t : offset(t, 0.1f), t});
  }
  const auto rep = metrics_report(pairs);
  const auto dir = testutil::scratch_dir("report");
  write_metrics_report(rep, dir);
  const auto table = read_method_table(dir / "metrics.csv");
  CHECK(std::isinf(table.at("sub-0").at("psnr3d")));
  for (const auto& [name, v] : rep.subjects[1].flatten()) CHECK(table.at("sub-1").at(name) == v);
  CHECK(metrics_json(rep).find("\"inf\"") != std::string::npos);
}
