#pragma once

#include <string>
#include <utility>

namespace trajflow::zones {

// OD zones are grid cells over the world bbox; ids dense in [0, rows*cols).
struct ZoneGrid {
  double lat_min = 0.0, lat_max = 1.0, lon_min = 0.0, lon_max = 1.0;
  int rows = 1, cols = 1;

  int count() const { return rows * cols; }
  int zone_of(double lat, double lon) const;
  // (lat_min, lat_max, lon_min, lon_max) of a cell.
  struct CellBounds {
    double lat_min, lat_max, lon_min, lon_max;
  };
  CellBounds cell(int zone) const;
  // Fractional position of a point within its cell, each axis clamped to [0,1].
  std::pair<double, double> fraction_in_cell(int zone, double lat,
                                             double lon) const;
  std::pair<double, double> point_from_fraction(int zone, double frac_lat,
                                                double frac_lon) const;

  std::string to_json() const;
  static ZoneGrid from_json(const std::string& text);
  static ZoneGrid load(const std::string& path);
  void save(const std::string& path) const;
};

}  // namespace trajflow::zones
