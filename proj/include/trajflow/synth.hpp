#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "trajflow/geo.hpp"
#include "trajflow/zones.hpp"

namespace trajflow::synth {

enum class WorldScale { URBAN, METRO, NATIONWIDE };

WorldScale scale_from_string(const std::string& s);
std::string scale_to_string(WorldScale s);

struct ModeProfile {
  double speed_kmh = 10.0;
  double speed_sigma = 2.0;
  double trip_km = 3.0;
  double trip_sigma = 1.0;
  double jitter_frac = 0.05;  // path jitter relative to trip length
};

struct World {
  WorldScale scale = WorldScale::URBAN;
  zones::ZoneGrid grid;
  std::array<ModeProfile, 5> profiles;  // indexed by TransportMode
  std::vector<std::array<double, 4>> corridors;  // train lines, lat0,lon0,lat1,lon1
  // Sub-regions of differing extents; NATIONWIDE mixes several, the others
  // hold one box equal to the full bbox.
  std::vector<std::array<double, 4>> regions;
  std::uint64_t seed = 0;
};

World make_world(std::uint64_t seed, WorldScale scale);

geo::Trajectory sample_trajectory(const World& world, std::mt19937_64& rng);

// n trajectories with per-record seeds derived from the master seed, so the
// result does not depend on worker count. ids are "t" + zero-padded index.
std::vector<geo::Trajectory> make_dataset(const World& world, std::size_t n,
                                          std::uint64_t master_seed);

struct Split {
  std::vector<std::string> train, val, test;
};
// 80/10/10 contiguous split over the dataset order.
Split default_split(const std::vector<geo::Trajectory>& dataset);

}  // namespace trajflow::synth
