#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace trajflow::geo {

inline constexpr double kEarthRadiusKm = 6371.0088;

using Vec2 = std::array<double, 2>;
using Path = std::vector<Vec2>;

enum class TransportMode { TRAIN, CAR, WALK, BIKE, OTHER };

TransportMode mode_from_string(const std::string& s);
std::string mode_to_string(TransportMode m);

struct GeoPoint {
  double lat = 0.0;  // degrees WGS84, [-90, 90]
  double lon = 0.0;  // degrees WGS84, [-180, 180]
  double t = 0.0;    // seconds since trajectory start
};

struct Trajectory {
  std::string id;
  std::vector<GeoPoint> points;  // timestamps non-decreasing, size >= 2
  TransportMode mode = TransportMode::OTHER;
  int departure_bin = 0;  // 5-minute bins of day, [0, 287]
  std::pair<int, int> od_zone{0, 0};

  void validate() const;  // throws std::invalid_argument on violation
};

// Per-axis affine frame: geo = offset + scale * normalized.
struct NormalizationFrame {
  Vec2 offset{0.0, 0.0};  // degrees (lat, lon)
  Vec2 scale{1.0, 1.0};   // degrees per unit, components > 0
};

struct NumericFeatures {
  // Raw values.
  double avg_speed = 0.0;          // km/h
  double avg_step_distance = 0.0;  // km
  double elapsed_time = 0.0;       // seconds
  double cumulative_distance = 0.0;  // km
  double step_count = 0.0;
  // Standardized (z-scored) counterparts, filled once dataset stats exist.
  std::array<double, 5> standardized{};

  std::array<double, 5> raw() const {
    return {avg_speed, avg_step_distance, elapsed_time, cumulative_distance,
            step_count};
  }
};

double haversine_km(double lat1, double lon1, double lat2, double lon2);
double haversine_km(const GeoPoint& a, const GeoPoint& b);

// Rescales a trajectory into [-1,1]^2 with a per-axis min-max map.
// A zero-extent axis maps to coordinate 0 with scale 1.
std::pair<Path, NormalizationFrame> normalize_trajectory(const Trajectory& traj);

std::vector<Vec2> denormalize(const Path& path, const NormalizationFrame& frame);

// Arc-length uniform resampling onto the input polyline, endpoints preserved.
Path resample_uniform(const Path& path, std::size_t n);

NumericFeatures path_stats(const Trajectory& traj);

double path_length(const Path& path);  // planar polyline length

}  // namespace trajflow::geo
