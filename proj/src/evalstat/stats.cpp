#include "cycpl/evalstat/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "cycpl/error.hpp"

namespace cycpl::evalstat {

namespace {

double poly(std::initializer_list<double> c, double x) {
  double r = 0.0, p = 1.0;
  for (double v : c) {
    r += v * p;
    p *= x;
  }
  return r;
}

double norm_quantile(double q) { return boost::math::quantile(boost::math::normal(), q); }
double norm_upper(double z) { return boost::math::cdf(boost::math::complement(boost::math::normal(), z)); }
double norm_lower(double z) { return boost::math::cdf(boost::math::normal(), z); }

}  // namespace

SwResult shapiro_wilk(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 3 || n > 5000)
    fail(ErrorCode::DegenerateSample, "Shapiro-Wilk needs 3 <= n <= 5000, got " + std::to_string(n));
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  if (!(x.back() - x.front() > 0.0))
    fail(ErrorCode::DegenerateSample, "Shapiro-Wilk sample is constant");
  for (double v : x)
    if (!std::isfinite(v)) fail(ErrorCode::DegenerateSample, "Shapiro-Wilk sample is not finite");

  const double an = static_cast<double>(n);
  const std::size_t half = n / 2;
  // Coefficients for the upper half, a[0] pairs the extremes.
  std::vector<double> a(half);
  if (n == 3) {
    a[0] = std::sqrt(0.5);
  } else {
    std::vector<double> m(half);
    double summ2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      m[i] = norm_quantile((static_cast<double>(i + 1) - 0.375) / (an + 0.25));
      summ2 += m[i] * m[i];
    }
    summ2 *= 2.0;
    const double ssumm2 = std::sqrt(summ2);
    const double rsn = 1.0 / std::sqrt(an);
    const double a1 = poly({0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056}, rsn) - m[0] / ssumm2;
    std::size_t first = 1;
    double fac;
    if (n > 5) {
      first = 2;
      const double a2 = -m[1] / ssumm2 + poly({0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633}, rsn);
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) /
                      (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
      a[1] = a2;
    } else {
      fac = std::sqrt((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1));
    }
    a[0] = a1;
    for (std::size_t i = first; i < half; ++i) a[i] = -m[i] / fac;
  }

  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / an;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  double num = 0.0;
  for (std::size_t i = 0; i < half; ++i) num += a[i] * (x[n - 1 - i] - x[i]);
  double w = std::min(1.0, num * num / ss);

  SwResult r;
  r.w = w;
  if (n == 3) {
    const double pi6 = 6.0 / std::numbers::pi, stqr = std::numbers::pi / 3.0;
    r.p = std::max(0.0, pi6 * (std::asin(std::sqrt(w)) - stqr));
    return r;
  }
  const double y = std::log(1.0 - w);
  if (n <= 11) {
    const double gamma = poly({-2.273, 0.459}, an);
    if (y >= gamma) {
      r.p = 1e-99;
      return r;
    }
    const double yy = -std::log(gamma - y);
    const double m = poly({0.544, -0.39978, 0.025054, -6.714e-4}, an);
    const double s = std::exp(poly({1.3822, -0.77857, 0.062767, -0.0020322}, an));
    r.p = norm_upper((yy - m) / s);
  } else {
    const double xx = std::log(an);
    const double m = poly({-1.5861, -0.31082, -0.083751, 0.0038915}, xx);
    const double s = std::exp(poly({-0.4803, -0.082676, 0.0030302}, xx));
    r.p = norm_upper((y - m) / s);
  }
  return r;
}

std::string_view to_string(Direction d) { return d == Direction::Greater ? "greater" : "less"; }
std::string_view to_string(TestKind k) { return k == TestKind::PairedT ? "paired_t" : "wilcoxon"; }

TestResult paired_t_one_sided(std::span<const double> d, Direction dir) {
  const std::size_t n = d.size();
  if (n < 2) fail(ErrorCode::DegenerateSample, "paired t needs at least 2 differences");
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0) || !std::isfinite(sd)) fail(ErrorCode::DegenerateSample, "paired differences have zero spread");
  TestResult r;
  r.statistic = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  r.p = dir == Direction::Greater ? boost::math::cdf(boost::math::complement(dist, r.statistic))
                                  : boost::math::cdf(dist, r.statistic);
  return r;
}

TestResult wilcoxon_one_sided(std::span<const double> d, Direction dir) {
  std::vector<double> nz;
  for (double v : d)
    if (v != 0.0) nz.push_back(v);
  if (nz.empty()) fail(ErrorCode::AllZeroDifferences, "all paired differences are zero");
  const std::size_t n = nz.size();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return std::abs(nz[i]) < std::abs(nz[j]); });
  // Doubled average ranks keep everything integral.
  std::vector<std::size_t> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(nz[order[j + 1]]) == std::abs(nz[order[i]])) ++j;
    const std::size_t r2 = (i + 1) + (j + 1);  // twice the average of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  std::size_t w2 = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (nz[i] > 0) w2 += rank2[i];

  TestResult r;
  r.statistic = 0.5 * static_cast<double>(w2);
  if (n <= 25) {
    const std::size_t total2 = std::accumulate(rank2.begin(), rank2.end(), std::size_t{0});
    std::vector<double> count(total2 + 1, 0.0);
    count[0] = 1.0;
    for (std::size_t r2 : rank2)
      for (std::size_t s = total2; s >= r2; --s) {
        count[s] += count[s - r2];
        if (s == r2) break;
      }
    double hits = 0.0;
    for (std::size_t s = 0; s <= total2; ++s)
      if (dir == Direction::Greater ? s >= w2 : s <= w2) hits += count[s];
    r.p = hits / std::ldexp(1.0, static_cast<int>(n));
  } else {
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    const double sd = std::sqrt(var);
    r.p = dir == Direction::Greater ? norm_upper((r.statistic - mean - 0.5) / sd)
                                    : norm_lower((r.statistic - mean + 0.5) / sd);
  }
  r.p = std::clamp(r.p, 0.0, 1.0);
  return r;
}

std::vector<double> bh_adjust(std::span<const double> p) {
  for (double v : p)
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::OutOfRange, "p-values must lie in [0, 1]");
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return p[i] < p[j]; });
  std::vector<double> adj(m);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    const double v = p[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1);
    running = std::min(running, v);
    adj[order[k]] = std::min(1.0, running);
  }
  return adj;
}

std::string endpoint_family(std::string_view e) {
  std::string s(e.substr(0, e.find('_')));
  if (s.size() > 2 && s.ends_with("3d")) s.resize(s.size() - 2);
  return s;
}

Direction endpoint_direction(std::string_view family) {
  return family == "ssim" || family == "psnr" ? Direction::Greater : Direction::Less;
}

std::vector<StatRow> compare_methods(const std::string& contrast, const MethodTable& a,
                                     const MethodTable& b, const CompareOptions& opt) {
  if (a.empty()) fail(ErrorCode::UnpairedSubjects, "no subjects to compare");
  if (a.size() != b.size() || !std::equal(a.begin(), a.end(), b.begin(),
                                          [](const auto& x, const auto& y) { return x.first == y.first; }))
    fail(ErrorCode::UnpairedSubjects, "the two methods were evaluated on different subjects");
  const auto& endpoints = a.begin()->second;
  for (const auto& tbl : {&a, &b})
    for (const auto& [subject, vals] : *tbl) {
      if (vals.size() != endpoints.size())
        fail(ErrorCode::UnpairedSubjects, "subject " + subject + " has a different endpoint set");
      for (const auto& [name, v] : endpoints)
        if (!vals.contains(name))
          fail(ErrorCode::UnpairedSubjects, "subject " + subject + " lacks endpoint " + name);
    }

  std::vector<StatRow> rows;
  for (const auto& [endpoint, unused] : endpoints) {
    StatRow row;
    row.contrast = contrast;
    row.endpoint = endpoint;
    row.family = endpoint_family(endpoint);
    row.direction = endpoint_direction(row.family);
    row.normality_p = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> d;
    for (const auto& [subject, vals] : a) {
      const double va = vals.at(endpoint), vb = b.at(subject).at(endpoint);
      d.push_back(va == vb ? 0.0 : va - vb);
    }
    row.n = d.size();

    bool finite = true;
    double max_abs = 0.0;
    for (double v : d) {
      finite = finite && std::isfinite(v);
      max_abs = std::max(max_abs, std::abs(v));
    }
    bool use_t = false;
    if (finite && d.size() >= 2 && max_abs > 0.0) {
      const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
      double ss = 0.0;
      for (double v : d) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / static_cast<double>(d.size() - 1));
      if (sd > 1e-12 * max_abs) {
        if (d.size() >= 3) {
          row.normality_p = shapiro_wilk(d).p;
          use_t = row.normality_p >= opt.normality_alpha;
        } else {
          use_t = true;
        }
      }
    }
    if (use_t) {
      const auto t = paired_t_one_sided(d, row.direction);
      row.test = TestKind::PairedT;
      row.statistic = t.statistic;
      row.p_raw = t.p;
    } else {
      row.test = TestKind::Wilcoxon;
      if (max_abs == 0.0) {
        row.statistic = 0.0;
        row.p_raw = 1.0;
      } else {
        const auto w = wilcoxon_one_sided(d, row.direction);
        row.statistic = w.statistic;
        row.p_raw = w.p;
      }
    }
    rows.push_back(row);
  }

  std::map<std::string, std::vector<std::size_t>> families;
  for (std::size_t i = 0; i < rows.size(); ++i) families[rows[i].family].push_back(i);
  for (const auto& [fam, idx] : families) {
    std::vector<double> p;
    for (std::size_t i : idx) p.push_back(rows[i].p_raw);
    const auto adj = bh_adjust(p);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      rows[idx[k]].p_adj = adj[k];
      rows[idx[k]].significant = adj[k] < opt.alpha;
    }
  }
  return rows;
}

}  // namespace cycpl::evalstat
