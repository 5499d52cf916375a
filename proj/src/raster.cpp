#include "gadst/raster.hpp"

#include <algorithm>
#include <cmath>

#include "gadst/error.hpp"

namespace gadst {

CountGrid::CountGrid(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
  if (static_cast<int64_t>(v.size()) != static_cast<int64_t>(r) * c)
    throw ShapeError("grid data length does not match " + std::to_string(r) + "x" +
                     std::to_string(c));
}

double CountGrid::sum() const {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

double CountGrid::max() const {
  double m = 0;
  for (double x : v) m = std::max(m, x);
  return m;
}

namespace {

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void GridSpec::validate() const {
  if (!(lat_min < lat_max) || !(lon_min < lon_max))
    throw ValidationError("bounding box must have positive extent");
  if (!power_of_two(rows) || !power_of_two(cols))
    throw ValidationError("grid rows and cols must be powers of two, got " + std::to_string(rows) +
                          "x" + std::to_string(cols));
}

std::optional<std::pair<int, int>> GridSpec::cell_of(double lat, double lon) const {
  if (lat < lat_min || lat > lat_max || lon < lon_min || lon > lon_max) return std::nullopt;
  // Row 0 is the northernmost band; latitude decreases with row index.
  int r = static_cast<int>(std::floor((lat_max - lat) / cell_height()));
  int c = static_cast<int>(std::floor((lon - lon_min) / cell_width()));
  r = std::clamp(r, 0, rows - 1);
  c = std::clamp(c, 0, cols - 1);
  return std::make_pair(r, c);
}

}  // namespace gadst
