#include "trajflow/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace trajflow::dataset {

using nlohmann::json;
using nlohmann::ordered_json;

std::string trajectory_to_json_line(const geo::Trajectory& traj) {
  ordered_json j;
  j["id"] = traj.id;
  j["mode"] = geo::mode_to_string(traj.mode);
  j["departure_bin"] = traj.departure_bin;
  j["od"] = {traj.od_zone.first, traj.od_zone.second};
  auto pts = ordered_json::array();
  for (const auto& p : traj.points) pts.push_back({p.lat, p.lon, p.t});
  j["points"] = std::move(pts);
  return j.dump();
}

geo::Trajectory trajectory_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  geo::Trajectory traj;
  traj.id = j.at("id").get<std::string>();
  traj.mode = geo::mode_from_string(j.at("mode").get<std::string>());
  traj.departure_bin = j.at("departure_bin").get<int>();
  const auto& od = j.at("od");
  if (!od.is_array() || od.size() != 2)
    throw std::invalid_argument("field 'od' must be a 2-element array");
  traj.od_zone = {od[0].get<int>(), od[1].get<int>()};
  for (const auto& p : j.at("points")) {
    if (!p.is_array() || p.size() != 3)
      throw std::invalid_argument("each point must be [lat, lon, t]");
    traj.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
  }
  traj.validate();
  return traj;
}

std::vector<geo::Trajectory> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<geo::Trajectory> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(trajectory_from_json_line(line));
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << path << ":" << lineno << ": invalid record: " << e.what();
      throw std::runtime_error(msg.str());
    }
  }
  return out;
}

void write_jsonl(const std::string& path, const std::vector<geo::Trajectory>& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const auto& traj : data) out << trajectory_to_json_line(traj) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

SplitManifest read_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open split manifest: " + path);
  json j;
  in >> j;
  SplitManifest s;
  s.train = j.at("train").get<std::vector<std::string>>();
  s.val = j.at("val").get<std::vector<std::string>>();
  s.test = j.at("test").get<std::vector<std::string>>();
  return s;
}

void write_split(const std::string& path, const SplitManifest& split) {
  ordered_json j;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write split manifest: " + path);
  out << j.dump(2) << '\n';
}

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for hashing: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace trajflow::dataset
