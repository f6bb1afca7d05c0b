#pragma once

#include <string>
#include <vector>

#include "trajflow/geo.hpp"

namespace trajflow::dataset {

// JSON Lines, one object per line:
//   {"id": str, "mode": str, "departure_bin": int, "od": [int, int],
//    "points": [[lat, lon, t], ...]}
// Invariant violations are reported with the offending line number.
std::vector<geo::Trajectory> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, const std::vector<geo::Trajectory>& data);

std::string trajectory_to_json_line(const geo::Trajectory& traj);
geo::Trajectory trajectory_from_json_line(const std::string& line);

struct SplitManifest {
  std::vector<std::string> train, val, test;
};

SplitManifest read_split(const std::string& path);
void write_split(const std::string& path, const SplitManifest& split);

// FNV-1a over file bytes, for run-manifest artifact hashes.
std::uint64_t file_hash(const std::string& path);

}  // namespace trajflow::dataset
