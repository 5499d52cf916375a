#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "gadst/date.hpp"
#include "gadst/raster.hpp"

namespace gadst {

// GeoLife .plt: 6 header lines, then comma-separated
// lat,lon,0,altitude,serial_date,YYYY-MM-DD,HH:MM:SS with UTC wall clock.
std::vector<TracePoint> parse_geolife_plt(std::istream& in, const std::string& user_id);
std::vector<TracePoint> parse_geolife_plt_file(const std::string& path, const std::string& user_id);

// All .plt files under <root>/Data/<user>/Trajectory, in filename order.
std::vector<TracePoint> load_geolife_user(const std::string& root, const std::string& user_id);

// Generic trace CSV: header `user_id,timestamp,lat,lon`, ISO-8601 timestamps.
// Returned sorted ascending by timestamp (stable within equal stamps).
std::vector<TracePoint> parse_csv_trace(std::istream& in);
std::vector<TracePoint> parse_csv_trace_file(const std::string& path);

struct DayBucketResult {
  VisitCountRaster raster;
  int64_t dropped = 0;  // points outside the bounding box
};

// Bin one calendar day's points into a grid. Half-open cells, row 0 north;
// out-of-box points are dropped and tallied.
DayBucketResult rasterize_day(const std::vector<TracePoint>& points, const GridSpec& grid,
                              Date date);

struct RasterizeResult {
  DailySeries series;            // one raster per observed day, day_index gap-marked
  int64_t dropped_bbox = 0;      // in range but outside the bounding box
  int64_t dropped_range = 0;     // outside [date_min, date_max]
  int64_t binned = 0;
};

// Bucket points into civil days (fixed UTC offset) and rasterize each day in
// [date_min, date_max]. Days with no binned points are absent from the series.
RasterizeResult rasterize(const std::vector<TracePoint>& points, const GridSpec& grid,
                          Date date_min, Date date_max, int utc_offset_minutes);

// Fill every calendar-day gap between the first and last raster with the
// elementwise mean of observed rasters sharing the gap's day of week.
// Observed days are returned unchanged; imputed days carry imputed = true.
DailySeries impute_missing(const DailySeries& series);

// Divide all counts by the series-wide max and record it as scale_max.
// All-zero series: unchanged, scale_max = 1.
DailySeries scale_unit(const DailySeries& series);
CountGrid unscale(const CountGrid& grid, double scale_max);

// Sliding 14-in/7-out windows, stride 1. Needs a gap-free series of >= 21 days.
std::vector<SupervisedWindow> make_windows(const DailySeries& series,
                                           const std::vector<ExtFeature>& ext);

struct UserMeta {
  bool employed = true;
};

std::vector<ExtFeature> external_features(const std::vector<Date>& dates,
                                          const HolidayCalendar& calendar, UserMeta meta);

struct IngestSummary {
  std::string user_id;
  int days = 0;
  int weekdays = 0;
  int weekends_holidays = 0;
  int missing_weekdays = 0;
  int missing_weekends = 0;
  int64_t dropped_bbox = 0;
  int64_t dropped_range = 0;
  double scale_max = 1.0;
};

IngestSummary summarize(const DailySeries& scaled, const HolidayCalendar& calendar,
                        int64_t dropped_bbox, int64_t dropped_range);

// 2009 Chinese public holidays falling inside common GeoLife study ranges.
std::vector<Date> default_geolife_holidays();

}  // namespace gadst
