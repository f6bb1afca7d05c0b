#include "trajflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "trajflow/util.hpp"

namespace trajflow::synth {

namespace {

constexpr double kKmPerDegLat = 111.32;

double km_per_deg_lon(double lat) {
  return kKmPerDegLat * std::cos(lat * std::numbers::pi / 180.0);
}

// splitmix64: decorrelates per-record seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double clamp_positive(double v, double lo) { return std::max(v, lo); }

}  // namespace

WorldScale scale_from_string(const std::string& s) {
  if (s == "urban") return WorldScale::URBAN;
  if (s == "metro") return WorldScale::METRO;
  if (s == "nationwide") return WorldScale::NATIONWIDE;
  throw std::invalid_argument("unknown world scale: " + s +
                              " (expected urban, metro or nationwide)");
}

std::string scale_to_string(WorldScale s) {
  switch (s) {
    case WorldScale::URBAN: return "urban";
    case WorldScale::METRO: return "metro";
    case WorldScale::NATIONWIDE: return "nationwide";
  }
  throw std::invalid_argument("bad world scale value");
}

World make_world(std::uint64_t seed, WorldScale scale) {
  World w;
  w.scale = scale;
  w.seed = seed;
  std::mt19937_64 rng(mix_seed(seed, 0x5741524c44ULL));

  double extent = 0.5;
  if (scale == WorldScale::METRO) extent = 1.5;
  if (scale == WorldScale::NATIONWIDE) extent = 6.0;
  std::uniform_real_distribution<double> center_lat(30.0, 42.0);
  std::uniform_real_distribution<double> center_lon(130.0, 142.0);
  const double clat = center_lat(rng);
  const double clon = center_lon(rng);
  w.grid.lat_min = clat - extent / 2;
  w.grid.lat_max = clat + extent / 2;
  w.grid.lon_min = clon - extent / 2;
  w.grid.lon_max = clon + extent / 2;
  w.grid.rows = 8;
  w.grid.cols = 8;

  auto& p = w.profiles;
  p[static_cast<std::size_t>(geo::TransportMode::TRAIN)] = {60.0, 8.0, 30.0, 8.0, 0.01};
  p[static_cast<std::size_t>(geo::TransportMode::CAR)] = {35.0, 6.0, 12.0, 4.0, 0.04};
  p[static_cast<std::size_t>(geo::TransportMode::WALK)] = {4.5, 0.8, 1.5, 0.5, 0.08};
  p[static_cast<std::size_t>(geo::TransportMode::BIKE)] = {14.0, 2.5, 4.0, 1.2, 0.06};
  p[static_cast<std::size_t>(geo::TransportMode::OTHER)] = {10.0, 3.0, 3.0, 1.5, 0.06};

  std::uniform_real_distribution<double> ulat(w.grid.lat_min, w.grid.lat_max);
  std::uniform_real_distribution<double> ulon(w.grid.lon_min, w.grid.lon_max);
  for (int c = 0; c < 3; ++c)
    w.corridors.push_back({ulat(rng), ulon(rng), ulat(rng), ulon(rng)});

  if (scale == WorldScale::NATIONWIDE) {
    // Sub-regions of mixed extents reproduce the multi-scale signal problem.
    const double fracs[3] = {0.12, 0.3, 1.0};
    for (double f : fracs) {
      const double e = extent * f;
      std::uniform_real_distribution<double> rlat(w.grid.lat_min,
                                                  w.grid.lat_max - e);
      std::uniform_real_distribution<double> rlon(w.grid.lon_min,
                                                  w.grid.lon_max - e);
      const double la = f >= 1.0 ? w.grid.lat_min : rlat(rng);
      const double lo = f >= 1.0 ? w.grid.lon_min : rlon(rng);
      w.regions.push_back({la, la + e, lo, lo + e});
    }
  } else {
    w.regions.push_back(
        {w.grid.lat_min, w.grid.lat_max, w.grid.lon_min, w.grid.lon_max});
  }
  return w;
}

namespace {

struct PlanarFrame {
  double lat0, lon0, kx, ky;  // km = (d_lon * kx, d_lat * ky)
};

geo::Path bezier_path(const std::array<double, 2>& o,
                      const std::array<double, 2>& d, double jitter,
                      std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double dx = d[0] - o[0], dy = d[1] - o[1];
  // Perpendicular unit vector of the chord.
  const double len = std::max(1e-9, std::hypot(dx, dy));
  const double px = -dy / len, py = dx / len;
  std::array<double, 2> c1{o[0] + dx / 3 + px * jitter * normal(rng),
                           o[1] + dy / 3 + py * jitter * normal(rng)};
  std::array<double, 2> c2{o[0] + 2 * dx / 3 + px * jitter * normal(rng),
                           o[1] + 2 * dy / 3 + py * jitter * normal(rng)};
  const std::size_t dense = 4 * n;
  geo::Path curve(dense);
  for (std::size_t i = 0; i < dense; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(dense - 1);
    const double u = 1.0 - t;
    for (std::size_t a = 0; a < 2; ++a)
      curve[i][a] = u * u * u * o[a] + 3 * u * u * t * c1[a] +
                    3 * u * t * t * c2[a] + t * t * t * d[a];
  }
  geo::Path path = geo::resample_uniform(curve, n);
  const double point_jitter = 0.02 * jitter;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    path[i][0] += point_jitter * normal(rng);
    path[i][1] += point_jitter * normal(rng);
  }
  return path;
}

}  // namespace

geo::Trajectory sample_trajectory(const World& world, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Mode mix: everyday modes dominate, trains are a solid minority.
  const double u = uniform(rng);
  geo::TransportMode mode;
  if (u < 0.15) mode = geo::TransportMode::TRAIN;
  else if (u < 0.45) mode = geo::TransportMode::CAR;
  else if (u < 0.75) mode = geo::TransportMode::WALK;
  else if (u < 0.95) mode = geo::TransportMode::BIKE;
  else mode = geo::TransportMode::OTHER;
  const ModeProfile& prof = world.profiles[static_cast<std::size_t>(mode)];

  const auto& region =
      world.regions[std::uniform_int_distribution<std::size_t>(
          0, world.regions.size() - 1)(rng)];

  const double trip_km =
      clamp_positive(prof.trip_km + prof.trip_sigma * normal(rng),
                     0.15 * prof.trip_km);
  const double speed_kmh =
      clamp_positive(prof.speed_kmh + prof.speed_sigma * normal(rng),
                     0.3 * prof.speed_kmh);

  const double mid_lat = 0.5 * (region[0] + region[1]);
  const double ky = kKmPerDegLat;
  const double kx = km_per_deg_lon(mid_lat);

  std::array<double, 2> origin, dest;
  if (mode == geo::TransportMode::TRAIN && !world.corridors.empty()) {
    // Train trips hug a corridor: both endpoints near the same line.
    const auto& c = world.corridors[std::uniform_int_distribution<std::size_t>(
        0, world.corridors.size() - 1)(rng)];
    const double corr_km =
        std::hypot((c[2] - c[0]) * ky, (c[3] - c[1]) * kx);
    const double span = std::min(1.0, trip_km / std::max(corr_km, 1e-6));
    const double u1 = uniform(rng) * std::max(0.0, 1.0 - span);
    const double u2 = u1 + span;
    const double off = 0.3 / ky;  // a few hundred meters off the line
    origin = {c[0] + (c[2] - c[0]) * u1 + off * normal(rng),
              c[1] + (c[3] - c[1]) * u1 + off * normal(rng)};
    dest = {c[0] + (c[2] - c[0]) * u2 + off * normal(rng),
            c[1] + (c[3] - c[1]) * u2 + off * normal(rng)};
  } else {
    origin = {region[0] + (region[1] - region[0]) * uniform(rng),
              region[2] + (region[3] - region[2]) * uniform(rng)};
    bool placed = false;
    for (int attempt = 0; attempt < 16 && !placed; ++attempt) {
      const double theta = 2.0 * std::numbers::pi * uniform(rng);
      dest = {origin[0] + trip_km * std::sin(theta) / ky,
              origin[1] + trip_km * std::cos(theta) / kx};
      placed = dest[0] >= region[0] && dest[0] <= region[1] &&
               dest[1] >= region[2] && dest[1] <= region[3];
    }
    if (!placed) {
      dest[0] = std::clamp(dest[0], region[0], region[1]);
      dest[1] = std::clamp(dest[1], region[2], region[3]);
    }
  }
  origin[0] = std::clamp(origin[0], world.grid.lat_min, world.grid.lat_max);
  origin[1] = std::clamp(origin[1], world.grid.lon_min, world.grid.lon_max);
  dest[0] = std::clamp(dest[0], world.grid.lat_min, world.grid.lat_max);
  dest[1] = std::clamp(dest[1], world.grid.lon_min, world.grid.lon_max);

  const std::size_t n =
      std::uniform_int_distribution<std::size_t>(40, 120)(rng);
  const double jitter_deg = prof.jitter_frac * trip_km / ky;
  geo::Path path = bezier_path(origin, dest, jitter_deg, n, rng);
  for (auto& p : path) {
    p[0] = std::clamp(p[0], world.grid.lat_min, world.grid.lat_max);
    p[1] = std::clamp(p[1], world.grid.lon_min, world.grid.lon_max);
  }

  geo::Trajectory traj;
  traj.mode = mode;
  traj.departure_bin = std::uniform_int_distribution<int>(0, 287)(rng);
  traj.od_zone = {world.grid.zone_of(origin[0], origin[1]),
                  world.grid.zone_of(dest[0], dest[1])};
  double dist_km = 0.0;
  for (std::size_t i = 1; i < n; ++i)
    dist_km += geo::haversine_km(path[i - 1][0], path[i - 1][1], path[i][0],
                                 path[i][1]);
  const double elapsed = std::max(30.0, dist_km / speed_kmh * 3600.0);
  traj.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    geo::GeoPoint p;
    p.lat = path[i][0];
    p.lon = path[i][1];
    p.t = elapsed * static_cast<double>(i) / static_cast<double>(n - 1);
    traj.points.push_back(p);
  }
  return traj;
}

std::vector<geo::Trajectory> make_dataset(const World& world, std::size_t n,
                                          std::uint64_t master_seed) {
  if (n < 1) throw std::invalid_argument("make_dataset: n must be >= 1");
  std::vector<geo::Trajectory> out(n);
  int width = 1;
  for (std::size_t v = n; v >= 10; v /= 10) ++width;
  util::parallel_for(n, [&](std::size_t i) {
    std::mt19937_64 rng(mix_seed(master_seed, i));
    geo::Trajectory traj = sample_trajectory(world, rng);
    std::ostringstream id;
    id << 't';
    id.width(width);
    id.fill('0');
    id << i;
    traj.id = id.str();
    traj.validate();
    out[i] = std::move(traj);
  });
  return out;
}

Split default_split(const std::vector<geo::Trajectory>& dataset) {
  Split s;
  const std::size_t n = dataset.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) s.train.push_back(dataset[i].id);
    else if (i < n_train + n_val) s.val.push_back(dataset[i].id);
    else s.test.push_back(dataset[i].id);
  }
  return s;
}

}  // namespace trajflow::synth
