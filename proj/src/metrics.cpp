#include "trajflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "trajflow/util.hpp"

namespace trajflow::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double euclid(const Vec2& a, const Vec2& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

double haversine(const Vec2& a, const Vec2& b) {
  return geo::haversine_km(a[0], a[1], b[0], b[1]);
}

template <typename Cost>
double dtw_impl(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                Cost cost, double abandon_above) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("dtw: empty sequence");
  const std::size_t m = a.size(), n = b.size();
  std::vector<double> prev(n + 1, kInf), cur(n + 1, kInf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= m; ++i) {
    cur[0] = kInf;
    double row_min = kInf;
    for (std::size_t j = 1; j <= n; ++j) {
      const double c = cost(a[i - 1], b[j - 1]);
      cur[j] = c + std::min({prev[j], cur[j - 1], prev[j - 1]});
      row_min = std::min(row_min, cur[j]);
    }
    if (row_min > abandon_above) return kInf;  // early abandon: result exceeds bound
    std::swap(prev, cur);
  }
  return prev[n];
}

template <typename Cost>
double frechet_impl(const std::vector<Vec2>& a, const std::vector<Vec2>& b,
                    Cost cost, double abandon_above) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("frechet: empty sequence");
  const std::size_t m = a.size(), n = b.size();
  std::vector<double> prev(n, kInf), cur(n, kInf);
  for (std::size_t i = 0; i < m; ++i) {
    double row_min = kInf;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = cost(a[i], b[j]);
      double reach;
      if (i == 0 && j == 0)
        reach = d;
      else if (i == 0)
        reach = std::max(cur[j - 1], d);
      else if (j == 0)
        reach = std::max(prev[j], d);
      else
        reach = std::max(std::min({prev[j], cur[j - 1], prev[j - 1]}), d);
      cur[j] = reach;
      row_min = std::min(row_min, reach);
    }
    if (row_min > abandon_above) return kInf;
    std::swap(prev, cur);
  }
  return prev[n - 1];
}

}  // namespace

double dtw(const Path& a, const Path& b) { return dtw_impl(a, b, euclid, kInf); }

double dtw_geo(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  return dtw_impl(a, b, haversine, kInf);
}

double frechet(const Path& a, const Path& b) {
  return frechet_impl(a, b, euclid, kInf);
}

double frechet_geo(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  return frechet_impl(a, b, haversine, kInf);
}

DensityMap density_histogram(const std::vector<geo::Trajectory>& dataset,
                             double lat_min, double lat_max, double lon_min,
                             double lon_max, std::size_t rows,
                             std::size_t cols) {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("density_histogram: bins must be >= 1");
  if (!(lat_max > lat_min) || !(lon_max > lon_min))
    throw std::invalid_argument("density_histogram: degenerate bbox");

  DensityMap map{lat_min, lat_max, lon_min, lon_max, rows, cols,
                 std::vector<double>(rows * cols + 1, 0.0), false};
  std::size_t n_points = 0;
  for (const auto& traj : dataset) {
    for (const auto& p : traj.points) {
      ++n_points;
      if (p.lat < lat_min || p.lat > lat_max || p.lon < lon_min ||
          p.lon > lon_max) {
        map.overflow() += 1.0;
        continue;
      }
      auto r = static_cast<std::size_t>((p.lat - lat_min) / (lat_max - lat_min) *
                                        static_cast<double>(rows));
      auto c = static_cast<std::size_t>((p.lon - lon_min) / (lon_max - lon_min) *
                                        static_cast<double>(cols));
      r = std::min(r, rows - 1);
      c = std::min(c, cols - 1);
      map.at(r, c) += 1.0;
    }
  }
  map.empty_input = n_points == 0;
  constexpr double alpha = 1e-9;
  double total = 0.0;
  for (auto& m : map.mass) {
    m += alpha;
    total += m;
  }
  for (auto& m : map.mass) m /= total;
  return map;
}

double js_divergence(const DensityMap& p, const DensityMap& q) {
  if (p.rows != q.rows || p.cols != q.cols || p.lat_min != q.lat_min ||
      p.lat_max != q.lat_max || p.lon_min != q.lon_min ||
      p.lon_max != q.lon_max)
    throw std::invalid_argument("js_divergence: bbox/bins mismatch");
  double js = 0.0;
  for (std::size_t i = 0; i < p.mass.size(); ++i) {
    const double pi = p.mass[i], qi = q.mass[i];
    const double mi = 0.5 * (pi + qi);
    if (pi > 0.0) js += 0.5 * pi * std::log2(pi / mi);
    if (qi > 0.0) js += 0.5 * qi * std::log2(qi / mi);
  }
  return std::clamp(js, 0.0, 1.0);
}

DistStats distribution_stats(std::vector<double> values) {
  if (values.empty())
    throw std::invalid_argument("distribution_stats: empty list");
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  DistStats s;
  s.median = quantile(0.5);
  s.iqr = quantile(0.75) - quantile(0.25);
  s.p10 = quantile(0.1);
  s.p90 = quantile(0.9);
  return s;
}

MetricReport evaluate(const std::vector<geo::Trajectory>& real,
                      const std::vector<geo::Trajectory>& generated,
                      double lat_min, double lat_max, double lon_min,
                      double lon_max, std::size_t bins) {
  if (real.empty() || generated.empty())
    throw std::invalid_argument("evaluate: empty dataset");

  std::vector<std::vector<Vec2>> real_pts(real.size());
  for (std::size_t i = 0; i < real.size(); ++i)
    for (const auto& p : real[i].points) real_pts[i].push_back({p.lat, p.lon});

  std::vector<double> dtw_min(generated.size()), fr_min(generated.size());
  util::parallel_for(generated.size(), [&](std::size_t gi) {
    std::vector<Vec2> g;
    for (const auto& p : generated[gi].points) g.push_back({p.lat, p.lon});
    double best_dtw = kInf, best_fr = kInf;
    for (const auto& r : real_pts) {
      const double d = dtw_impl(g, r, haversine, best_dtw);
      if (d < best_dtw) best_dtw = d;
      const double f = frechet_impl(g, r, haversine, best_fr);
      if (f < best_fr) best_fr = f;
    }
    dtw_min[gi] = best_dtw;
    fr_min[gi] = best_fr;
  });

  MetricReport report;
  report.n_pairs = generated.size();
  report.dtw_stats = distribution_stats(dtw_min);
  report.frechet_stats = distribution_stats(fr_min);
  const auto p = density_histogram(real, lat_min, lat_max, lon_min, lon_max,
                                   bins, bins);
  const auto q = density_histogram(generated, lat_min, lat_max, lon_min,
                                   lon_max, bins, bins);
  report.density_js = js_divergence(p, q);
  return report;
}

std::string report_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["density_js"] = r.density_js;
  j["dtw_med"] = r.dtw_stats.median;
  j["dtw_iqr"] = r.dtw_stats.iqr;
  j["dtw_p10"] = r.dtw_stats.p10;
  j["dtw_p90"] = r.dtw_stats.p90;
  j["fr_med"] = r.frechet_stats.median;
  j["fr_iqr"] = r.frechet_stats.iqr;
  j["fr_p10"] = r.frechet_stats.p10;
  j["fr_p90"] = r.frechet_stats.p90;
  j["n_pairs"] = r.n_pairs;
  return j.dump(2);
}

}  // namespace trajflow::metrics
