#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gadst/date.hpp"
#include "gadst/error.hpp"
#include "gadst/ingest.hpp"
#include "gadst/raster.hpp"
#include "gadst/synth.hpp"

using namespace gadst;
namespace fs = std::filesystem;

namespace {

const char* kPltHeader =
    "Geolife trajectory\n"
    "WGS 84\n"
    "Altitude is in Feet\n"
    "Reserved 3\n"
    "0,2,255,My Track,0,0,2,8421376\n"
    "0\n";

GridSpec beijing_box() {
  GridSpec g;
  g.lat_min = 39;
  g.lat_max = 41;
  g.lon_min = 116;
  g.lon_max = 118;
  g.rows = 2;
  g.cols = 2;
  return g;
}

TracePoint pt(const std::string& date, const std::string& time, double lat, double lon) {
  TracePoint p;
  p.user_id = "u";
  p.when = parse_timestamp(date, time);
  p.lat = lat;
  p.lon = lon;
  return p;
}

VisitCountRaster flat_day(Date date, int day_index, double value, int rows = 2, int cols = 2) {
  VisitCountRaster r;
  r.date = date;
  r.day_index = day_index;
  r.grid = CountGrid(rows, cols);
  for (auto& v : r.grid.v) v = value;
  return r;
}

DailySeries series_of(const std::vector<VisitCountRaster>& days) {
  DailySeries s;
  s.user_id = "u";
  s.area.rows = days.empty() ? 0 : days.front().grid.rows;
  s.area.cols = days.empty() ? 0 : days.front().grid.cols;
  s.days = days;
  return s;
}

}  // namespace

TEST_CASE("plt parsing reads the fields after the six header lines") {
  std::istringstream in(
      std::string(kPltHeader) +
      "39.984702,116.318417,0,492,39904.12,2009-04-01,02:53:04\n"
      "39.984683,116.31845,0,492,39904.13,2009-04-01,02:53:10\n"
      "40.008945,116.321551,0,160,39905.5,2009-04-02,11:59:00\n");
  const std::vector<TracePoint> pts = parse_geolife_plt(in, "004");
  REQUIRE(pts.size() == 3);
  CHECK(pts[0].user_id == "004");
  CHECK(pts[0].lat == doctest::Approx(39.984702).epsilon(1e-12));
  CHECK(pts[0].lon == doctest::Approx(116.318417).epsilon(1e-12));
  CHECK(pts[0].when.secs == parse_timestamp("2009-04-01", "02:53:04").secs);
  CHECK(pts[2].when.secs == parse_timestamp("2009-04-02", "11:59:00").secs);
}

TEST_CASE("plt parsing edge cases") {
  {
    std::istringstream in(kPltHeader);  // header only, no points
    CHECK(parse_geolife_plt(in, "004").empty());
  }
  {
    std::istringstream in("Geolife trajectory\nWGS 84\n");
    CHECK_THROWS_AS(parse_geolife_plt(in, "004"), ParseError);
  }
  {
    std::istringstream in(std::string(kPltHeader) + "39.9,116.3,0,492\n");
    try {
      parse_geolife_plt(in, "004");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
  }
  {
    std::istringstream in(std::string(kPltHeader) +
                          "39.9,116.3,0,492,39904.12,2009-04-01,02:53:04\n"
                          "oops,116.3,0,492,39904.12,2009-04-01,02:53:05\n");
    try {
      parse_geolife_plt(in, "004");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 8") != std::string::npos);
    }
  }
  CHECK_THROWS_AS(parse_geolife_plt_file("/nonexistent/file.plt", "004"), IoError);
}

TEST_CASE("geolife user loader walks plt files in filename order") {
  const fs::path root = fs::temp_directory_path() / "gadst_geolife_test";
  const fs::path traj = root / "Data" / "004" / "Trajectory";
  fs::create_directories(traj);
  {
    std::ofstream f(traj / "20090402000000.plt");
    f << kPltHeader << "40.1,116.5,0,0,39905.0,2009-04-02,01:00:00\n";
  }
  {
    std::ofstream f(traj / "20090401000000.plt");
    f << kPltHeader << "39.9,116.3,0,0,39904.0,2009-04-01,01:00:00\n";
  }
  const std::vector<TracePoint> pts = load_geolife_user(root.string(), "004");
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].when.civil_date(0) == Date::from_ymd(2009, 4, 1));
  CHECK(pts[1].when.civil_date(0) == Date::from_ymd(2009, 4, 2));
  CHECK(pts[0].user_id == "004");

  CHECK_THROWS_AS(load_geolife_user(root.string(), "999"), IoError);
  fs::remove_all(root);
}

TEST_CASE("trace csv parsing validates schema and sorts by time") {
  {
    std::istringstream in(
        "user_id,timestamp,lat,lon\n"
        "u1,2009-04-01T10:00:00,40.5,116.5\n"
        "u1,2009-04-01T08:00:00,39.5,117.5\n"
        "u1,2009-04-01T08:00:00,39.6,117.6\n");
    const std::vector<TracePoint> pts = parse_csv_trace(in);
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].when.secs == parse_timestamp("2009-04-01", "08:00:00").secs);
    CHECK(pts[0].lat == 39.5);   // stable: first of the equal stamps keeps its slot
    CHECK(pts[1].lat == 39.6);
    CHECK(pts[2].lat == 40.5);
  }
  {
    std::istringstream in("user_id,timestamp,lat,lon\n");
    CHECK(parse_csv_trace(in).empty());
  }
  {
    std::istringstream in("user,when,lat,lon\nu1,2009-04-01T08:00:00,39.5,117.5\n");
    CHECK_THROWS_AS(parse_csv_trace(in), SchemaError);
  }
  {
    std::istringstream in("user_id,timestamp,lat,lon\nu1,2009-04-01T08:00:00,91.0,117.5\n");
    CHECK_THROWS_AS(parse_csv_trace(in), ValidationError);
  }
  {
    std::istringstream in("user_id,timestamp,lat,lon\nu1,2009-04-01T08:00:00,39.5,181.0\n");
    CHECK_THROWS_AS(parse_csv_trace(in), ValidationError);
  }
  {
    std::istringstream in("user_id,timestamp,lat,lon\nu1,not-a-time,39.5,117.5\n");
    CHECK_THROWS_AS(parse_csv_trace(in), ParseError);
  }
  CHECK_THROWS_AS(parse_csv_trace_file("/nonexistent/trace.csv"), IoError);
}

TEST_CASE("day rasterization bins points with edge folding") {
  const GridSpec g = beijing_box();
  const Date d = Date::from_ymd(2009, 4, 1);

  std::vector<TracePoint> pts;
  pts.push_back(pt("2009-04-01", "01:00:00", 40.5, 116.5));  // NW cell
  pts.push_back(pt("2009-04-01", "02:00:00", 40.5, 116.5));  // same cell again
  pts.push_back(pt("2009-04-01", "03:00:00", 39.5, 117.5));  // SE cell
  pts.push_back(pt("2009-04-01", "04:00:00", 40.0, 117.0));  // interior edges -> (1,1)
  pts.push_back(pt("2009-04-01", "05:00:00", 39.0, 118.0));  // outer S/E edges fold -> (1,1)
  pts.push_back(pt("2009-04-01", "06:00:00", 41.0, 116.0));  // outer N/W edges -> (0,0)
  pts.push_back(pt("2009-04-01", "07:00:00", 38.9, 116.5));  // south of the box
  pts.push_back(pt("2009-04-01", "08:00:00", 40.5, 118.1));  // east of the box

  const DayBucketResult res = rasterize_day(pts, g, d);
  CHECK(res.raster.date == d);
  CHECK(res.raster.grid.rows == 2);
  CHECK(res.raster.grid.cols == 2);
  CHECK(res.raster.grid.at(0, 0) == 3.0);
  CHECK(res.raster.grid.at(0, 1) == 0.0);
  CHECK(res.raster.grid.at(1, 0) == 0.0);
  CHECK(res.raster.grid.at(1, 1) == 3.0);
  CHECK(res.dropped == 2);
  CHECK(res.raster.sum() + static_cast<double>(res.dropped) == static_cast<double>(pts.size()));

  const DayBucketResult empty = rasterize_day({}, g, d);
  CHECK(empty.raster.sum() == 0.0);
  CHECK(empty.dropped == 0);
}

TEST_CASE("rasterize buckets into civil days at a fixed offset") {
  const GridSpec g = beijing_box();
  std::vector<TracePoint> pts;
  // 23:30 UTC on Mar 31 is 07:30 on Apr 1 at +08:00
  pts.push_back(pt("2009-03-31", "23:30:00", 40.5, 116.5));
  pts.push_back(pt("2009-04-01", "10:00:00", 40.5, 116.5));
  // 20:00 UTC on Apr 2 is 04:00 on Apr 3
  pts.push_back(pt("2009-04-02", "20:00:00", 39.5, 117.5));
  pts.push_back(pt("2009-03-29", "00:00:00", 40.5, 116.5));  // before the range
  pts.push_back(pt("2009-04-01", "11:00:00", 38.0, 116.5));  // outside the box

  const RasterizeResult res =
      rasterize(pts, g, Date::from_ymd(2009, 4, 1), Date::from_ymd(2009, 4, 5), 480);
  REQUIRE(res.series.days.size() == 2);  // Apr 2 has no points and is absent
  CHECK(res.series.days[0].date == Date::from_ymd(2009, 4, 1));
  CHECK(res.series.days[0].day_index == 0);
  CHECK(res.series.days[0].grid.at(0, 0) == 2.0);
  CHECK(res.series.days[1].date == Date::from_ymd(2009, 4, 3));
  CHECK(res.series.days[1].day_index == 2);
  CHECK(res.series.days[1].grid.at(1, 1) == 1.0);
  CHECK(res.binned == 3);
  CHECK(res.dropped_range == 1);
  CHECK(res.dropped_bbox == 1);
  CHECK(res.series.user_id == "u");

  CHECK_THROWS_AS(rasterize(pts, g, Date::from_ymd(2009, 4, 5), Date::from_ymd(2009, 4, 1), 480),
                  ValidationError);
}

TEST_CASE("imputation fills gaps with the same-weekday mean") {
  // Apr 6 2009 is a Monday. Drop Mon Apr 13; observed Mondays hold 2s and 4s.
  std::vector<VisitCountRaster> days;
  const Date start = Date::from_ymd(2009, 4, 6);
  for (int i = 0; i < 15; ++i) {
    if (i == 7) continue;
    const double v = (i == 0) ? 2.0 : (i == 14) ? 4.0 : 1.0;
    days.push_back(flat_day(start + i, i, v));
  }
  const DailySeries filled = impute_missing(series_of(days));
  REQUIRE(filled.days.size() == 15);
  for (int i = 0; i < 15; ++i) {
    CHECK(filled.days[static_cast<size_t>(i)].date == start + i);
    CHECK(filled.days[static_cast<size_t>(i)].day_index == i);
    CHECK(filled.days[static_cast<size_t>(i)].imputed == (i == 7));
  }
  for (double v : filled.days[7].grid.v) CHECK(v == 3.0);
  for (double v : filled.days[0].grid.v) CHECK(v == 2.0);
  for (double v : filled.days[1].grid.v) CHECK(v == 1.0);
}

TEST_CASE("imputation leaves gap-free series unchanged and rejects hopeless gaps") {
  std::vector<VisitCountRaster> days;
  const Date start = Date::from_ymd(2009, 4, 6);
  for (int i = 0; i < 7; ++i) days.push_back(flat_day(start + i, i, 1.0 + i));
  const DailySeries same = impute_missing(series_of(days));
  REQUIRE(same.days.size() == 7);
  for (size_t i = 0; i < 7; ++i) {
    CHECK_FALSE(same.days[i].imputed);
    CHECK(same.days[i].grid.v == days[i].grid.v);
  }

  // missing Tuesday with no observed Tuesday anywhere
  std::vector<VisitCountRaster> holed{flat_day(start, 0, 1.0), flat_day(start + 2, 2, 1.0)};
  try {
    impute_missing(series_of(holed));
    FAIL("expected ImputationError");
  } catch (const ImputationError& e) {
    CHECK(std::string(e.what()).find("Tuesday") != std::string::npos);
  }

  CHECK_THROWS_AS(impute_missing(series_of({})), InsufficientDataError);

  std::vector<VisitCountRaster> unsorted{flat_day(start + 1, 1, 1.0), flat_day(start, 0, 1.0)};
  CHECK_THROWS_AS(impute_missing(series_of(unsorted)), ValidationError);
}

TEST_CASE("unit scaling divides by the max and survives a roundtrip") {
  std::vector<VisitCountRaster> days{flat_day(Date::from_ymd(2009, 4, 6), 0, 4.0),
                                     flat_day(Date::from_ymd(2009, 4, 7), 1, 1.0)};
  days[0].grid.at(0, 0) = 10.0;
  const DailySeries scaled = scale_unit(series_of(days));
  REQUIRE(scaled.scale_max.has_value());
  CHECK(*scaled.scale_max == 10.0);
  CHECK(scaled.days[0].grid.at(0, 0) == 1.0);
  CHECK(scaled.days[0].grid.at(0, 1) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(scaled.days[1].grid.at(1, 1) == doctest::Approx(0.1).epsilon(1e-15));

  const CountGrid back = unscale(scaled.days[0].grid, *scaled.scale_max);
  for (int64_t i = 0; i < back.size(); ++i)
    CHECK(back.v[static_cast<size_t>(i)] ==
          doctest::Approx(days[0].grid.v[static_cast<size_t>(i)]).epsilon(1e-12));

  CHECK_THROWS_AS(scale_unit(scaled), ValidationError);
  CHECK_THROWS_AS(unscale(scaled.days[0].grid, 0.0), ValidationError);

  const DailySeries zeros =
      scale_unit(series_of({flat_day(Date::from_ymd(2009, 4, 6), 0, 0.0)}));
  REQUIRE(zeros.scale_max.has_value());
  CHECK(*zeros.scale_max == 1.0);
  CHECK(zeros.days[0].sum() == 0.0);
}

TEST_CASE("sliding windows carve 14-in 7-out samples with stride one") {
  const Date start = Date::from_ymd(2009, 4, 6);
  auto build = [&](int n) {
    std::vector<VisitCountRaster> days;
    for (int i = 0; i < n; ++i) days.push_back(flat_day(start + i, i, static_cast<double>(i)));
    return series_of(days);
  };
  HolidayCalendar cal(default_geolife_holidays());
  auto ext_for = [&](const DailySeries& s) {
    std::vector<Date> dates;
    for (const auto& d : s.days) dates.push_back(d.date);
    return external_features(dates, cal, UserMeta{true});
  };

  {
    const DailySeries s = build(21);
    const std::vector<SupervisedWindow> w = make_windows(s, ext_for(s));
    REQUIRE(w.size() == 1);
    REQUIRE(w[0].week_a.size() == 7);
    REQUIRE(w[0].week_b.size() == 7);
    REQUIRE(w[0].target.size() == 7);
    REQUIRE(w[0].ext.size() == 7);
    CHECK(w[0].week_a[0].date == start);
    CHECK(w[0].week_b[0].date == start + 7);
    CHECK(w[0].target[0].date == start + 14);
    for (int i = 0; i < 7; ++i) CHECK(w[0].ext[static_cast<size_t>(i)].date == start + 14 + i);
    CHECK(w[0].week_a[0].grid.at(0, 0) == 0.0);
    CHECK(w[0].target[6].grid.at(0, 0) == 20.0);
  }
  {
    const DailySeries s = build(27);
    const std::vector<SupervisedWindow> w = make_windows(s, ext_for(s));
    REQUIRE(w.size() == 7);
    for (size_t k = 0; k < w.size(); ++k) {
      CHECK(w[k].week_a[0].date == start + static_cast<int>(k));
      CHECK(w[k].target[0].date == start + 14 + static_cast<int>(k));
    }
    // adjacent windows overlap by 20 shared days
    CHECK(w[0].target[1].date == w[1].target[0].date);
    CHECK(w[0].week_a[1].grid.v == w[1].week_a[0].grid.v);
  }
  CHECK_THROWS_AS(make_windows(build(20), ext_for(build(20))), InsufficientDataError);
  {
    DailySeries gapped = build(22);
    gapped.days.erase(gapped.days.begin() + 10);
    try {
      make_windows(gapped, ext_for(gapped));
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("impute") != std::string::npos);
    }
  }
  {
    const DailySeries s = build(21);
    std::vector<ExtFeature> ext = ext_for(s);
    ext.pop_back();  // drop the last target date's features
    CHECK_THROWS_AS(make_windows(s, ext), ValidationError);
  }
}

TEST_CASE("external features reflect the calendar and employment") {
  HolidayCalendar cal(default_geolife_holidays());
  const std::vector<Date> dates{Date::from_ymd(2009, 4, 4), Date::from_ymd(2009, 4, 5),
                                Date::from_ymd(2009, 4, 6), Date::from_ymd(2009, 5, 1)};

  const std::vector<ExtFeature> employed = external_features(dates, cal, UserMeta{true});
  REQUIRE(employed.size() == 4);
  CHECK(employed[0].is_weekend == 1.0);  // Saturday (and a holiday)
  CHECK(employed[1].is_weekend == 1.0);  // Sunday
  CHECK(employed[2].is_weekend == 0.0);  // ordinary Monday
  CHECK(employed[3].is_weekend == 1.0);  // Friday holiday
  CHECK(employed[0].work_reported == 0.0);
  CHECK(employed[2].work_reported == 1.0);
  CHECK(employed[3].work_reported == 0.0);
  for (size_t i = 0; i < dates.size(); ++i) CHECK(employed[i].date == dates[i]);

  const std::vector<ExtFeature> idle = external_features(dates, cal, UserMeta{false});
  for (const ExtFeature& e : idle) CHECK(e.work_reported == 0.0);
  CHECK(idle[2].is_weekend == 0.0);
}

TEST_CASE("default holiday list pins the study period") {
  const std::vector<Date> h = default_geolife_holidays();
  REQUIRE(h.size() == 3);
  CHECK(h[0] == Date::from_ymd(2009, 4, 4));
  CHECK(h[1] == Date::from_ymd(2009, 5, 1));
  CHECK(h[2] == Date::from_ymd(2009, 5, 28));
}

TEST_CASE("synthetic generator is seed-deterministic with a commuter shape") {
  SynthSpec spec;
  spec.days = 28;
  spec.noise_level = 0.0;

  const DailySeries a = synth_generate(spec, 7);
  const DailySeries b = synth_generate(spec, 7);
  REQUIRE(a.days.size() == 28);
  REQUIRE(b.days.size() == 28);
  for (size_t i = 0; i < a.days.size(); ++i) {
    CHECK(a.days[i].date == spec.start + static_cast<int>(i));
    CHECK(a.days[i].day_index == static_cast<int>(i));
    CHECK(a.days[i].grid.v == b.days[i].grid.v);
  }

  int weekdays = 0, weekends = 0;
  for (const auto& d : a.days) (d.date.is_weekend() ? weekends : weekdays)++;
  CHECK(weekdays == 20);
  CHECK(weekends == 8);

  // noiseless: weekday pattern puts mass at home+work, weekend at home+leisure
  const VisitCountRaster* wd = nullptr;
  const VisitCountRaster* we = nullptr;
  for (const auto& d : a.days) (d.date.is_weekend() ? we : wd) = &d;
  REQUIRE(wd != nullptr);
  REQUIRE(we != nullptr);
  CHECK(wd->grid.at(spec.work_r, spec.work_c) > 0.0);
  CHECK(wd->grid.at(spec.leisure_r, spec.leisure_c) == 0.0);
  CHECK(we->grid.at(spec.leisure_r, spec.leisure_c) > 0.0);
  CHECK(we->grid.at(spec.work_r, spec.work_c) == 0.0);
  for (const auto& d : a.days) {
    const auto& ref = d.date.is_weekend() ? *we : *wd;
    CHECK(d.grid.v == ref.grid.v);
  }

  SynthSpec noisy = spec;
  noisy.noise_level = 2.0;
  const DailySeries n1 = synth_generate(noisy, 7);
  const DailySeries n2 = synth_generate(noisy, 7);
  const DailySeries n3 = synth_generate(noisy, 8);
  bool all_equal = true;
  for (size_t i = 0; i < n1.days.size(); ++i) {
    CHECK(n1.days[i].grid.v == n2.days[i].grid.v);
    if (n1.days[i].grid.v != n3.days[i].grid.v) all_equal = false;
  }
  CHECK_FALSE(all_equal);

  SynthSpec bad = spec;
  bad.home_r = spec.rows;
  CHECK_THROWS_AS(synth_generate(bad, 7), ConfigError);
  bad = spec;
  bad.days = 0;
  CHECK_THROWS_AS(synth_generate(bad, 7), ConfigError);
}

TEST_CASE("summaries count calendar classes and carry scale metadata") {
  SynthSpec spec;
  spec.days = 28;
  DailySeries s = scale_unit(synth_generate(spec, 11));
  s.days[2].imputed = true;              // Apr 3, a Friday
  s.days[3].imputed = true;              // Apr 4, Saturday
  HolidayCalendar cal(default_geolife_holidays());

  const IngestSummary sum = summarize(s, cal, 5, 7);
  CHECK(sum.user_id == s.user_id);
  CHECK(sum.days == 28);
  CHECK(sum.weekdays == 20);
  CHECK(sum.weekends_holidays == 8);
  CHECK(sum.missing_weekdays == 1);
  CHECK(sum.missing_weekends == 1);
  CHECK(sum.dropped_bbox == 5);
  CHECK(sum.dropped_range == 7);
  CHECK(sum.scale_max == *s.scale_max);
}
