#include "trajflow/geo.hpp"

#include <algorithm>
#include <cmath>

namespace trajflow::geo {

TransportMode mode_from_string(const std::string& s) {
  if (s == "TRAIN") return TransportMode::TRAIN;
  if (s == "CAR") return TransportMode::CAR;
  if (s == "WALK") return TransportMode::WALK;
  if (s == "BIKE") return TransportMode::BIKE;
  if (s == "OTHER") return TransportMode::OTHER;
  throw std::invalid_argument("unknown transport mode: " + s);
}

std::string mode_to_string(TransportMode m) {
  switch (m) {
    case TransportMode::TRAIN: return "TRAIN";
    case TransportMode::CAR: return "CAR";
    case TransportMode::WALK: return "WALK";
    case TransportMode::BIKE: return "BIKE";
    case TransportMode::OTHER: return "OTHER";
  }
  throw std::invalid_argument("invalid transport mode value");
}

void Trajectory::validate() const {
  if (points.size() < 2)
    throw std::invalid_argument("trajectory '" + id + "': fewer than 2 points");
  if (departure_bin < 0 || departure_bin > 287)
    throw std::invalid_argument("trajectory '" + id + "': departure_bin out of [0,287]");
  double prev_t = -1.0;
  for (const auto& p : points) {
    if (!(p.lat >= -90.0 && p.lat <= 90.0))
      throw std::invalid_argument("trajectory '" + id + "': latitude out of range");
    if (!(p.lon >= -180.0 && p.lon <= 180.0))
      throw std::invalid_argument("trajectory '" + id + "': longitude out of range");
    if (!(p.t >= 0.0) || !std::isfinite(p.t))
      throw std::invalid_argument("trajectory '" + id + "': negative or non-finite timestamp");
    if (p.t < prev_t)
      throw std::invalid_argument("trajectory '" + id + "': timestamps decrease");
    prev_t = p.t;
  }
}

double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double deg = M_PI / 180.0;
  const double dlat = (lat2 - lat1) * deg;
  const double dlon = (lon2 - lon1) * deg;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * deg) * std::cos(lat2 * deg) *
                       std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  return haversine_km(a.lat, a.lon, b.lat, b.lon);
}

std::pair<Path, NormalizationFrame> normalize_trajectory(const Trajectory& traj) {
  if (traj.points.size() < 2)
    throw std::invalid_argument("normalize_trajectory: fewer than 2 points");
  Vec2 lo{traj.points[0].lat, traj.points[0].lon};
  Vec2 hi = lo;
  for (const auto& p : traj.points) {
    lo[0] = std::min(lo[0], p.lat);
    lo[1] = std::min(lo[1], p.lon);
    hi[0] = std::max(hi[0], p.lat);
    hi[1] = std::max(hi[1], p.lon);
  }
  NormalizationFrame frame;
  for (int a = 0; a < 2; ++a) {
    const double extent = hi[a] - lo[a];
    if (extent > 0.0) {
      frame.offset[a] = 0.5 * (lo[a] + hi[a]);
      frame.scale[a] = 0.5 * extent;
    } else {
      // Degenerate axis: coordinate 0, scale 1, offset at the constant value.
      frame.offset[a] = lo[a];
      frame.scale[a] = 1.0;
    }
  }
  Path out;
  out.reserve(traj.points.size());
  for (const auto& p : traj.points) {
    out.push_back({(p.lat - frame.offset[0]) / frame.scale[0],
                   (p.lon - frame.offset[1]) / frame.scale[1]});
  }
  return {std::move(out), frame};
}

std::vector<Vec2> denormalize(const Path& path, const NormalizationFrame& frame) {
  if (!(frame.scale[0] > 0.0 && frame.scale[1] > 0.0))
    throw std::invalid_argument("denormalize: frame scale must be positive");
  std::vector<Vec2> out;
  out.reserve(path.size());
  for (const auto& p : path) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
      throw std::invalid_argument("denormalize: non-finite input coordinate");
    out.push_back({frame.offset[0] + frame.scale[0] * p[0],
                   frame.offset[1] + frame.scale[1] * p[1]});
  }
  return out;
}

double path_length(const Path& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i)
    len += std::hypot(path[i][0] - path[i - 1][0], path[i][1] - path[i - 1][1]);
  return len;
}

Path resample_uniform(const Path& path, std::size_t n) {
  if (path.size() < 2) throw std::invalid_argument("resample_uniform: path too short");
  if (n < 2) throw std::invalid_argument("resample_uniform: n must be >= 2");

  std::vector<double> cum(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i)
    cum[i] = cum[i - 1] +
             std::hypot(path[i][0] - path[i - 1][0], path[i][1] - path[i - 1][1]);
  const double total = cum.back();

  Path out(n);
  out.front() = path.front();
  out.back() = path.back();
  if (total <= 0.0) {
    for (auto& p : out) p = path.front();
    return out;
  }
  std::size_t seg = 0;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(n - 1);
    while (seg + 2 < path.size() && cum[seg + 1] < s) ++seg;
    const double seg_len = cum[seg + 1] - cum[seg];
    const double u = seg_len > 0.0 ? (s - cum[seg]) / seg_len : 0.0;
    out[k] = {path[seg][0] + u * (path[seg + 1][0] - path[seg][0]),
              path[seg][1] + u * (path[seg + 1][1] - path[seg][1])};
  }
  return out;
}

NumericFeatures path_stats(const Trajectory& traj) {
  if (traj.points.size() < 2)
    throw std::invalid_argument("path_stats: fewer than 2 points");
  NumericFeatures f;
  for (std::size_t i = 1; i < traj.points.size(); ++i)
    f.cumulative_distance += haversine_km(traj.points[i - 1], traj.points[i]);
  f.elapsed_time = traj.points.back().t - traj.points.front().t;
  if (!(f.elapsed_time > 0.0))
    throw std::invalid_argument("path_stats: elapsed time must be positive");
  f.step_count = static_cast<double>(traj.points.size());
  f.avg_speed = f.cumulative_distance / (f.elapsed_time / 3600.0);
  f.avg_step_distance = f.cumulative_distance / (f.step_count - 1.0);
  return f;
}

}  // namespace trajflow::geo
