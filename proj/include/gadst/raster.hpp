#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gadst/date.hpp"

namespace gadst {

struct TracePoint {
  std::string user_id;
  Timestamp when;
  double lat = 0;
  double lon = 0;
};

// Plain 2-D grid of doubles, row-major, row 0 = north.
struct CountGrid {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  CountGrid() = default;
  CountGrid(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}
  CountGrid(int r, int c, std::vector<double> data);

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  int64_t size() const { return static_cast<int64_t>(v.size()); }
  double sum() const;
  double max() const;
  bool operator==(const CountGrid&) const = default;
};

// Geographic bounding box split into a power-of-two grid of equal cells.
struct GridSpec {
  double lat_min = 0, lat_max = 0;
  double lon_min = 0, lon_max = 0;
  int rows = 0, cols = 0;

  void validate() const;  // throws ValidationError
  double cell_height() const { return (lat_max - lat_min) / rows; }
  double cell_width() const { return (lon_max - lon_min) / cols; }

  // Cell for a point, or nullopt when outside the box. Points on an interior
  // edge go to the higher-index cell; the south and east outer edges fold
  // into the last row/column.
  std::optional<std::pair<int, int>> cell_of(double lat, double lon) const;
};

struct VisitCountRaster {
  Date date;
  int day_index = 0;  // days since the series' first date
  bool imputed = false;
  CountGrid grid;

  double sum() const { return grid.sum(); }
};

struct DailySeries {
  std::string user_id;
  GridSpec area;            // geographic spec when known; rows/cols always set
  std::vector<VisitCountRaster> days;
  std::optional<double> scale_max;  // set once scaled to [0,1]

  int rows() const { return days.empty() ? area.rows : days.front().grid.rows; }
  int cols() const { return days.empty() ? area.cols : days.front().grid.cols; }
};

// Per-day exogenous features.
struct ExtFeature {
  Date date;
  double is_weekend = 0;     // weekend or holiday
  double work_reported = 0;  // employed and a working day
};

// One supervised sample: two history weeks, a target week, and the target
// week's exogenous features.
struct SupervisedWindow {
  std::vector<VisitCountRaster> week_a;  // days t-14 .. t-8
  std::vector<VisitCountRaster> week_b;  // days t-7 .. t-1
  std::vector<VisitCountRaster> target;  // days t .. t+6
  std::vector<ExtFeature> ext;           // aligned with target
};

}  // namespace gadst
