#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "gadst/date.hpp"
#include "gadst/model.hpp"
#include "gadst/raster.hpp"
#include "gadst/synth.hpp"

namespace gadst {

// Run settings parsed from a `key = value` file. `#` starts a comment,
// blank lines are ignored, unknown keys are rejected.
struct RunConfig {
  std::string dataset = "synth";  // "synth" or "geolife"
  std::string user = "000";
  std::string data_dir;
  std::string workdir = "out";

  GridSpec grid{39.75, 40.10, 116.15, 116.60, 32, 32};
  std::optional<Date> date_min, date_max;
  int utc_offset_minutes = 480;
  bool employed = true;
  std::vector<Date> holidays;
  bool holidays_set = false;  // true once the file provided a holidays key

  int max_level = -1;  // -1 derives the deepest level from the grid
  double train_frac = 0.6;

  HyperConfig hyper;
  SynthSpec synth;

  void validate() const;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

// Configured holidays; GeoLife runs without an explicit list fall back to
// the bundled defaults.
std::vector<Date> effective_holidays(const RunConfig& cfg);

}  // namespace gadst
