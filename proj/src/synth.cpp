#include "gadst/synth.hpp"

#include <algorithm>

#include "gadst/error.hpp"
#include "gadst/rng.hpp"

namespace gadst {

void SynthSpec::validate() const {
  if (rows < 1 || cols < 1) throw ConfigError("synthetic grid needs positive dimensions");
  if (days < 1) throw ConfigError("synthetic series needs at least one day");
  const auto inside = [&](int r, int c, const char* what) {
    if (r < 0 || r >= rows || c < 0 || c >= cols)
      throw ConfigError(std::string(what) + " cell (" + std::to_string(r) + "," +
                        std::to_string(c) + ") is outside the " + std::to_string(rows) + "x" +
                        std::to_string(cols) + " grid");
  };
  inside(home_r, home_c, "home");
  inside(work_r, work_c, "work");
  inside(leisure_r, leisure_c, "leisure");
  if (weekday_home < 0 || weekday_work < 0 || weekend_home < 0 || weekend_leisure < 0)
    throw ConfigError("visit intensities must be nonnegative");
  if (noise_level < 0) throw ConfigError("noise_level must be nonnegative");
}

DailySeries synth_generate(const SynthSpec& spec, uint64_t seed) {
  spec.validate();
  Rng rng(seed);

  DailySeries s;
  s.user_id = "synth";
  s.area.lat_min = 0;
  s.area.lat_max = 1;
  s.area.lon_min = 0;
  s.area.lon_max = 1;
  s.area.rows = spec.rows;
  s.area.cols = spec.cols;

  const double w = std::min(spec.noise_level, 1.0);
  for (int d = 0; d < spec.days; ++d) {
    const Date date = spec.start + d;
    const bool weekend = date.is_weekend();

    VisitCountRaster r;
    r.date = date;
    r.day_index = d;
    r.grid = CountGrid(spec.rows, spec.cols);

    const auto place = [&](int rr, int cc, double base) {
      double count = base;
      if (w > 0 && base > 0) count = (1.0 - w) * base + w * rng.poisson(base);
      r.grid.at(rr, cc) += static_cast<double>(std::llround(count));
    };
    if (weekend) {
      place(spec.home_r, spec.home_c, spec.weekend_home);
      place(spec.leisure_r, spec.leisure_c, spec.weekend_leisure);
    } else {
      place(spec.home_r, spec.home_c, spec.weekday_home);
      place(spec.work_r, spec.work_c, spec.weekday_work);
    }

    const int extra = rng.poisson(spec.noise_level);
    for (int k = 0; k < extra; ++k) {
      const int rr = static_cast<int>(rng.below(static_cast<uint64_t>(spec.rows)));
      const int cc = static_cast<int>(rng.below(static_cast<uint64_t>(spec.cols)));
      r.grid.at(rr, cc) += 1;
    }

    s.days.push_back(std::move(r));
  }
  return s;
}

}  // namespace gadst
