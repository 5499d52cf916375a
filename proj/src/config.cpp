#include "gadst/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gadst/error.hpp"
#include "gadst/ingest.hpp"

namespace gadst {

namespace {

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config key '" + key + "' needs " + want + ", got '" + value + "'");
}

int64_t to_int(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const int64_t v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0') bad_value(key, value, "an integer");
  return v;
}

double to_double(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') bad_value(key, value, "a number");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "a boolean");
}

Date to_date(const std::string& key, const std::string& value) {
  try {
    return Date::parse(value);
  } catch (const ParseError&) {
    bad_value(key, value, "a YYYY-MM-DD date");
  }
}

std::vector<Date> to_date_list(const std::string& key, const std::string& value) {
  std::vector<Date> out;
  std::string item;
  std::istringstream ss(value);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(to_date(key, item));
  }
  return out;
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const size_t hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected 'key = value' on line " + std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("empty key on line " + std::to_string(line_no));

    if (key == "dataset") {
      cfg.dataset = value;
    } else if (key == "user") {
      cfg.user = value;
    } else if (key == "data_dir") {
      cfg.data_dir = value;
    } else if (key == "workdir") {
      cfg.workdir = value;
    } else if (key == "lat_min") {
      cfg.grid.lat_min = to_double(key, value);
    } else if (key == "lat_max") {
      cfg.grid.lat_max = to_double(key, value);
    } else if (key == "lon_min") {
      cfg.grid.lon_min = to_double(key, value);
    } else if (key == "lon_max") {
      cfg.grid.lon_max = to_double(key, value);
    } else if (key == "rows") {
      cfg.grid.rows = static_cast<int>(to_int(key, value));
      cfg.synth.rows = cfg.grid.rows;
    } else if (key == "cols") {
      cfg.grid.cols = static_cast<int>(to_int(key, value));
      cfg.synth.cols = cfg.grid.cols;
    } else if (key == "date_min") {
      cfg.date_min = to_date(key, value);
    } else if (key == "date_max") {
      cfg.date_max = to_date(key, value);
    } else if (key == "utc_offset_minutes") {
      cfg.utc_offset_minutes = static_cast<int>(to_int(key, value));
    } else if (key == "employed") {
      cfg.employed = to_bool(key, value);
    } else if (key == "holidays") {
      cfg.holidays = to_date_list(key, value);
      cfg.holidays_set = true;
    } else if (key == "max_level") {
      cfg.max_level = static_cast<int>(to_int(key, value));
    } else if (key == "train_frac") {
      cfg.train_frac = to_double(key, value);
    } else if (key == "filters") {
      cfg.hyper.filters = static_cast<int>(to_int(key, value));
    } else if (key == "kernel") {
      cfg.hyper.kernel = static_cast<int>(to_int(key, value));
    } else if (key == "depth") {
      cfg.hyper.depth = static_cast<int>(to_int(key, value));
    } else if (key == "d_a") {
      cfg.hyper.d_a = static_cast<int>(to_int(key, value));
    } else if (key == "ext_units") {
      cfg.hyper.ext_units = static_cast<int>(to_int(key, value));
    } else if (key == "horizon") {
      cfg.hyper.horizon = static_cast<int>(to_int(key, value));
    } else if (key == "dropout") {
      cfg.hyper.dropout = to_double(key, value);
    } else if (key == "lambda1") {
      cfg.hyper.lambda1 = to_double(key, value);
    } else if (key == "lambda2") {
      cfg.hyper.lambda2 = to_double(key, value);
    } else if (key == "batch_size") {
      cfg.hyper.batch_size = static_cast<int>(to_int(key, value));
    } else if (key == "epochs") {
      cfg.hyper.epochs = static_cast<int>(to_int(key, value));
    } else if (key == "lr") {
      cfg.hyper.lr = to_double(key, value);
    } else if (key == "lr_decay") {
      cfg.hyper.lr_decay = to_double(key, value);
    } else if (key == "seed") {
      cfg.hyper.seed = static_cast<uint64_t>(to_int(key, value));
    } else if (key == "teacher_forcing") {
      cfg.hyper.teacher_forcing = to_bool(key, value);
    } else if (key == "days") {
      cfg.synth.days = static_cast<int>(to_int(key, value));
    } else if (key == "start_date") {
      cfg.synth.start = to_date(key, value);
    } else if (key == "home_r") {
      cfg.synth.home_r = static_cast<int>(to_int(key, value));
    } else if (key == "home_c") {
      cfg.synth.home_c = static_cast<int>(to_int(key, value));
    } else if (key == "work_r") {
      cfg.synth.work_r = static_cast<int>(to_int(key, value));
    } else if (key == "work_c") {
      cfg.synth.work_c = static_cast<int>(to_int(key, value));
    } else if (key == "leisure_r") {
      cfg.synth.leisure_r = static_cast<int>(to_int(key, value));
    } else if (key == "leisure_c") {
      cfg.synth.leisure_c = static_cast<int>(to_int(key, value));
    } else if (key == "weekday_home") {
      cfg.synth.weekday_home = to_double(key, value);
    } else if (key == "weekday_work") {
      cfg.synth.weekday_work = to_double(key, value);
    } else if (key == "weekend_home") {
      cfg.synth.weekend_home = to_double(key, value);
    } else if (key == "weekend_leisure") {
      cfg.synth.weekend_leisure = to_double(key, value);
    } else if (key == "noise_level") {
      cfg.synth.noise_level = to_double(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "' on line " + std::to_string(line_no));
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  try {
    return parse_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void RunConfig::validate() const {
  if (dataset != "synth" && dataset != "geolife")
    throw ConfigError("dataset must be 'synth' or 'geolife', got '" + dataset + "'");
  if (dataset == "geolife") {
    try {
      grid.validate();
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
    if (user.empty()) throw ConfigError("geolife runs need a user id");
  }
  if (date_min && date_max && *date_max < *date_min)
    throw ConfigError("date_max precedes date_min");
  if (utc_offset_minutes < -16 * 60 || utc_offset_minutes > 16 * 60)
    throw ConfigError("utc_offset_minutes is outside the plausible range");
  if (!(train_frac > 0) || !(train_frac < 1)) throw ConfigError("train_frac must be in (0, 1)");
  if (max_level < -1) throw ConfigError("max_level must be -1 or nonnegative");
  hyper.validate();
  if (dataset == "synth") synth.validate();
}

std::vector<Date> effective_holidays(const RunConfig& cfg) {
  if (cfg.holidays_set) return cfg.holidays;
  if (cfg.dataset == "geolife") return default_geolife_holidays();
  return {};
}

}  // namespace gadst
