#include "gadst/ingest.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gadst/error.hpp"

namespace gadst {

namespace {

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  return out;
}

double parse_double(const std::string& s, const char* what, int64_t line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw ParseError(std::string("bad ") + what + " '" + s + "' on line " +
                     std::to_string(line_no));
  return v;
}

}  // namespace

std::vector<TracePoint> parse_geolife_plt(std::istream& in, const std::string& user_id) {
  std::vector<TracePoint> points;
  std::string line;
  int64_t line_no = 0;
  for (; line_no < 6; ++line_no)
    if (!std::getline(in, line)) throw ParseError("trajectory file ends inside its header");
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() < 7)
      throw ParseError("expected 7 comma-separated fields on line " + std::to_string(line_no));
    TracePoint p;
    p.user_id = user_id;
    p.lat = parse_double(f[0], "latitude", line_no);
    p.lon = parse_double(f[1], "longitude", line_no);
    try {
      p.when = parse_timestamp(f[5], f[6]);
    } catch (const ParseError& e) {
      throw ParseError(std::string(e.what()) + " on line " + std::to_string(line_no));
    }
    points.push_back(std::move(p));
  }
  return points;
}

std::vector<TracePoint> parse_geolife_plt_file(const std::string& path,
                                               const std::string& user_id) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory file: " + path);
  try {
    return parse_geolife_plt(in, user_id);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::vector<TracePoint> load_geolife_user(const std::string& root, const std::string& user_id) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(root) / "Data" / user_id / "Trajectory";
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("no trajectory directory: " + dir.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".plt")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

  std::vector<TracePoint> points;
  for (const fs::path& f : files) {
    std::vector<TracePoint> part = parse_geolife_plt_file(f.string(), user_id);
    points.insert(points.end(), std::make_move_iterator(part.begin()),
                  std::make_move_iterator(part.end()));
  }
  return points;
}

std::vector<TracePoint> parse_csv_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trace CSV is empty");
  {
    std::vector<std::string> header = split_csv(line);
    const std::vector<std::string> want = {"user_id", "timestamp", "lat", "lon"};
    if (header != want)
      throw SchemaError("trace CSV header must be 'user_id,timestamp,lat,lon', got '" +
                        trim(line) + "'");
  }
  std::vector<TracePoint> points;
  int64_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() != 4)
      throw ParseError("expected 4 comma-separated fields on line " + std::to_string(line_no));
    TracePoint p;
    p.user_id = f[0];
    try {
      p.when = parse_timestamp_iso(f[1]);
    } catch (const ParseError& e) {
      throw ParseError(std::string(e.what()) + " on line " + std::to_string(line_no));
    }
    p.lat = parse_double(f[2], "latitude", line_no);
    p.lon = parse_double(f[3], "longitude", line_no);
    if (p.lat < -90.0 || p.lat > 90.0)
      throw ValidationError("latitude out of range on line " + std::to_string(line_no));
    if (p.lon < -180.0 || p.lon > 180.0)
      throw ValidationError("longitude out of range on line " + std::to_string(line_no));
    points.push_back(std::move(p));
  }
  std::stable_sort(points.begin(), points.end(),
                   [](const TracePoint& a, const TracePoint& b) { return a.when < b.when; });
  return points;
}

std::vector<TracePoint> parse_csv_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace CSV: " + path);
  try {
    return parse_csv_trace(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

DayBucketResult rasterize_day(const std::vector<TracePoint>& points, const GridSpec& grid,
                              Date date) {
  grid.validate();
  DayBucketResult res;
  res.raster.date = date;
  res.raster.grid = CountGrid(grid.rows, grid.cols);
  for (const TracePoint& p : points) {
    if (auto cell = grid.cell_of(p.lat, p.lon)) {
      res.raster.grid.at(cell->first, cell->second) += 1;
    } else {
      ++res.dropped;
    }
  }
  return res;
}

RasterizeResult rasterize(const std::vector<TracePoint>& points, const GridSpec& grid,
                          Date date_min, Date date_max, int utc_offset_minutes) {
  grid.validate();
  if (date_max < date_min) throw ValidationError("date range is empty");

  RasterizeResult res;
  std::map<int32_t, CountGrid> day_grids;
  for (const TracePoint& p : points) {
    const Date d = p.when.civil_date(utc_offset_minutes);
    if (d < date_min || date_max < d) {
      ++res.dropped_range;
      continue;
    }
    const auto cell = grid.cell_of(p.lat, p.lon);
    if (!cell) {
      ++res.dropped_bbox;
      continue;
    }
    CountGrid& g = day_grids.try_emplace(d.days, grid.rows, grid.cols).first->second;
    g.at(cell->first, cell->second) += 1;
    ++res.binned;
  }

  res.series.area = grid;
  if (!points.empty()) res.series.user_id = points.front().user_id;
  if (!day_grids.empty()) {
    const int32_t first = day_grids.begin()->first;
    for (auto& [day, g] : day_grids) {
      VisitCountRaster r;
      r.date = Date{day};
      r.day_index = day - first;
      r.grid = std::move(g);
      res.series.days.push_back(std::move(r));
    }
  }
  return res;
}

DailySeries impute_missing(const DailySeries& series) {
  if (series.days.empty()) throw InsufficientDataError("cannot impute an empty series");
  for (size_t i = 1; i < series.days.size(); ++i)
    if (!(series.days[i - 1].date < series.days[i].date))
      throw ValidationError("series days must be strictly increasing by date");

  const int rows = series.rows(), cols = series.cols();
  CountGrid sums[7];
  int counts[7] = {};
  for (const VisitCountRaster& d : series.days) {
    if (d.grid.rows != rows || d.grid.cols != cols)
      throw ShapeError("series rasters disagree in shape");
    const int w = d.date.weekday();
    if (counts[w] == 0) sums[w] = CountGrid(rows, cols);
    for (size_t k = 0; k < d.grid.v.size(); ++k) sums[w].v[k] += d.grid.v[k];
    ++counts[w];
  }

  static const char* kWeekday[7] = {"Monday", "Tuesday",  "Wednesday", "Thursday",
                                    "Friday", "Saturday", "Sunday"};

  DailySeries out;
  out.user_id = series.user_id;
  out.area = series.area;
  out.scale_max = series.scale_max;
  const Date first = series.days.front().date;
  const Date last = series.days.back().date;
  size_t next = 0;
  for (Date d = first; d <= last; ++d) {
    if (next < series.days.size() && series.days[next].date == d) {
      VisitCountRaster r = series.days[next++];
      r.day_index = d - first;
      out.days.push_back(std::move(r));
      continue;
    }
    const int w = d.weekday();
    if (counts[w] == 0)
      throw ImputationError("no observed " + std::string(kWeekday[w]) + " to impute " + d.str());
    VisitCountRaster r;
    r.date = d;
    r.day_index = d - first;
    r.imputed = true;
    r.grid = CountGrid(rows, cols);
    for (size_t k = 0; k < r.grid.v.size(); ++k) r.grid.v[k] = sums[w].v[k] / counts[w];
    out.days.push_back(std::move(r));
  }
  return out;
}

DailySeries scale_unit(const DailySeries& series) {
  if (series.scale_max) throw ValidationError("series is already scaled");
  double m = 0;
  for (const VisitCountRaster& d : series.days) m = std::max(m, d.grid.max());

  DailySeries out = series;
  if (m <= 0) {
    out.scale_max = 1.0;
    return out;
  }
  for (VisitCountRaster& d : out.days)
    for (double& v : d.grid.v) v /= m;
  out.scale_max = m;
  return out;
}

CountGrid unscale(const CountGrid& grid, double scale_max) {
  if (!(scale_max > 0)) throw ValidationError("scale_max must be positive");
  CountGrid out = grid;
  for (double& v : out.v) v *= scale_max;
  return out;
}

std::vector<SupervisedWindow> make_windows(const DailySeries& series,
                                           const std::vector<ExtFeature>& ext) {
  const int64_t n = static_cast<int64_t>(series.days.size());
  if (n < 21)
    throw InsufficientDataError("sliding windows need at least 21 days, got " + std::to_string(n));
  const Date first = series.days.front().date;
  for (int64_t i = 0; i < n; ++i)
    if (series.days[static_cast<size_t>(i)].date != first + static_cast<int>(i))
      throw ValidationError("series has calendar gaps; impute before windowing");

  std::map<int32_t, ExtFeature> by_date;
  for (const ExtFeature& e : ext) by_date[e.date.days] = e;

  std::vector<SupervisedWindow> windows;
  windows.reserve(static_cast<size_t>(n - 20));
  for (int64_t i = 0; i + 21 <= n; ++i) {
    SupervisedWindow w;
    const auto* base = series.days.data() + i;
    w.week_a.assign(base, base + 7);
    w.week_b.assign(base + 7, base + 14);
    w.target.assign(base + 14, base + 21);
    for (const VisitCountRaster& t : w.target) {
      const auto it = by_date.find(t.date.days);
      if (it == by_date.end())
        throw ValidationError("missing external features for " + t.date.str());
      w.ext.push_back(it->second);
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

std::vector<ExtFeature> external_features(const std::vector<Date>& dates,
                                          const HolidayCalendar& calendar, UserMeta meta) {
  std::vector<ExtFeature> out;
  out.reserve(dates.size());
  for (Date d : dates) {
    const bool off = calendar.weekend_or_holiday(d);
    ExtFeature e;
    e.date = d;
    e.is_weekend = off ? 1.0 : 0.0;
    e.work_reported = (meta.employed && !off) ? 1.0 : 0.0;
    out.push_back(e);
  }
  return out;
}

IngestSummary summarize(const DailySeries& scaled, const HolidayCalendar& calendar,
                        int64_t dropped_bbox, int64_t dropped_range) {
  IngestSummary s;
  s.user_id = scaled.user_id;
  s.days = static_cast<int>(scaled.days.size());
  for (const VisitCountRaster& d : scaled.days) {
    const bool off = calendar.weekend_or_holiday(d.date);
    if (off)
      ++s.weekends_holidays;
    else
      ++s.weekdays;
    if (d.imputed) {
      if (off)
        ++s.missing_weekends;
      else
        ++s.missing_weekdays;
    }
  }
  s.dropped_bbox = dropped_bbox;
  s.dropped_range = dropped_range;
  s.scale_max = scaled.scale_max.value_or(1.0);
  return s;
}

std::vector<Date> default_geolife_holidays() {
  return {Date::from_ymd(2009, 4, 4), Date::from_ymd(2009, 5, 1), Date::from_ymd(2009, 5, 28)};
}

}  // namespace gadst
