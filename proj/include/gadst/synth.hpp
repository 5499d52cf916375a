#pragma once

#include <cstdint>

#include "gadst/raster.hpp"

namespace gadst {

// Commuter-pattern generator: weekdays put mass on home+work, weekends on
// home+leisure. noise_level > 0 jitters the active-cell counts with Poisson
// draws and scatters Poisson(noise_level) stray visits over the grid.
struct SynthSpec {
  int rows = 8, cols = 8;
  int days = 120;
  Date start = Date::from_ymd(2009, 4, 1);
  int home_r = 1, home_c = 1;
  int work_r = 6, work_c = 6;
  int leisure_r = 1, leisure_c = 6;
  double weekday_home = 10, weekday_work = 8;
  double weekend_home = 12, weekend_leisure = 6;
  double noise_level = 2.0;  // jitter weight (capped at 1) and stray-visit rate

  void validate() const;  // cells inside grid, days >= 1
};

DailySeries synth_generate(const SynthSpec& spec, uint64_t seed);

}  // namespace gadst
