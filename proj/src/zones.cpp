#include "trajflow/zones.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace trajflow::zones {

int ZoneGrid::zone_of(double lat, double lon) const {
  const double fr = (lat - lat_min) / (lat_max - lat_min);
  const double fc = (lon - lon_min) / (lon_max - lon_min);
  const int r = std::clamp(static_cast<int>(fr * rows), 0, rows - 1);
  const int c = std::clamp(static_cast<int>(fc * cols), 0, cols - 1);
  return r * cols + c;
}

ZoneGrid::CellBounds ZoneGrid::cell(int zone) const {
  if (zone < 0 || zone >= count())
    throw std::invalid_argument("zone id out of range: " + std::to_string(zone));
  const int r = zone / cols;
  const int c = zone % cols;
  const double dlat = (lat_max - lat_min) / rows;
  const double dlon = (lon_max - lon_min) / cols;
  return {lat_min + r * dlat, lat_min + (r + 1) * dlat, lon_min + c * dlon,
          lon_min + (c + 1) * dlon};
}

std::pair<double, double> ZoneGrid::fraction_in_cell(int zone, double lat,
                                                     double lon) const {
  const auto b = cell(zone);
  const double fl = (lat - b.lat_min) / (b.lat_max - b.lat_min);
  const double fo = (lon - b.lon_min) / (b.lon_max - b.lon_min);
  return {std::clamp(fl, 0.0, 1.0), std::clamp(fo, 0.0, 1.0)};
}

std::pair<double, double> ZoneGrid::point_from_fraction(int zone,
                                                        double frac_lat,
                                                        double frac_lon) const {
  const auto b = cell(zone);
  return {b.lat_min + std::clamp(frac_lat, 0.0, 1.0) * (b.lat_max - b.lat_min),
          b.lon_min + std::clamp(frac_lon, 0.0, 1.0) * (b.lon_max - b.lon_min)};
}

std::string ZoneGrid::to_json() const {
  nlohmann::ordered_json j;
  j["lat_min"] = lat_min;
  j["lat_max"] = lat_max;
  j["lon_min"] = lon_min;
  j["lon_max"] = lon_max;
  j["rows"] = rows;
  j["cols"] = cols;
  return j.dump(2);
}

ZoneGrid ZoneGrid::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ZoneGrid g;
  g.lat_min = j.at("lat_min").get<double>();
  g.lat_max = j.at("lat_max").get<double>();
  g.lon_min = j.at("lon_min").get<double>();
  g.lon_max = j.at("lon_max").get<double>();
  g.rows = j.at("rows").get<int>();
  g.cols = j.at("cols").get<int>();
  if (g.rows < 1 || g.cols < 1 || !(g.lat_max > g.lat_min) ||
      !(g.lon_max > g.lon_min))
    throw std::invalid_argument("invalid zone grid");
  return g;
}

ZoneGrid ZoneGrid::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open zone grid file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json(text);
}

void ZoneGrid::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write zone grid file: " + path);
  out << to_json() << '\n';
}

}  // namespace trajflow::zones
