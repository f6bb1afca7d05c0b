#pragma once

#include <string>
#include <vector>

#include "trajflow/geo.hpp"

namespace trajflow::metrics {

using geo::Path;
using geo::Vec2;

// Dynamic time warping: minimum cumulative pairwise cost over monotone
// alignments. Planar variant uses Euclidean cost, _geo uses haversine km.
double dtw(const Path& a, const Path& b);
double dtw_geo(const std::vector<Vec2>& a, const std::vector<Vec2>& b);

// Discrete Frechet distance via the standard coupling DP.
double frechet(const Path& a, const Path& b);
double frechet_geo(const std::vector<Vec2>& a, const std::vector<Vec2>& b);

struct DensityMap {
  double lat_min, lat_max, lon_min, lon_max;
  std::size_t rows, cols;
  std::vector<double> mass;  // rows*cols grid cells + 1 overflow cell, sums to 1
  bool empty_input = false;

  double& at(std::size_t r, std::size_t c) { return mass[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return mass[r * cols + c]; }
  double& overflow() { return mass[rows * cols]; }
};

// Mesh-count histogram over all trajectory points, Laplace-smoothed
// (alpha = 1e-9 per cell) and normalized to total mass 1.
DensityMap density_histogram(const std::vector<geo::Trajectory>& dataset,
                             double lat_min, double lat_max, double lon_min,
                             double lon_max, std::size_t rows, std::size_t cols);

// Jensen-Shannon divergence, log base 2 so the range is [0, 1].
double js_divergence(const DensityMap& p, const DensityMap& q);

struct DistStats {
  double median, iqr, p10, p90;
};

// Percentiles by inclusive linear interpolation between order statistics.
DistStats distribution_stats(std::vector<double> values);

struct MetricReport {
  double density_js;
  DistStats dtw_stats;
  DistStats frechet_stats;
  std::size_t n_pairs;
};

// For every generated trajectory, the distance to its nearest real neighbor
// under the metric being reported; plus density JS over both point clouds.
MetricReport evaluate(const std::vector<geo::Trajectory>& real,
                      const std::vector<geo::Trajectory>& generated,
                      double lat_min, double lat_max, double lon_min,
                      double lon_max, std::size_t bins = 64);

std::string report_json(const MetricReport& report);

}  // namespace trajflow::metrics
