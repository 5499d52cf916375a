#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gadst/date.hpp"
#include "gadst/raster.hpp"

namespace gadst {

// Cellwise-overlap agreement between a truth raster and a forecast:
// recall = sum(min(X, Xhat)) / sum(X), precision = sum(min(X, Xhat)) / sum(Xhat).
// A ratio with a zero denominator is undefined and left empty.
struct OverlapMetrics {
  std::optional<double> recall, precision;
};

OverlapMetrics overlap_metrics(const CountGrid& truth, const CountGrid& pred);

// Uniform raster holding the truth's mass spread over all cells.
CountGrid naive_predict(const CountGrid& truth);

// Overlap metrics minus the same metrics for the naive raster of the truth.
struct NormalizedMetrics {
  std::optional<double> norm_recall, norm_precision;
};

NormalizedMetrics normalized_metrics(const CountGrid& truth, const CountGrid& pred);

// Mean and population standard deviation over the defined samples.
struct MetricStat {
  double mean = 0;
  double std_dev = 0;
  int64_t count = 0;  // samples that were defined
};

struct SplitReport {
  std::string split;  // "overall", "weekdays", "weekends"
  std::vector<MetricStat> norm_recall;     // one per forecast step
  std::vector<MetricStat> norm_precision;  // one per forecast step
};

struct EvalReport {
  int horizon = 0;
  std::vector<SplitReport> splits;
};

// forecasts[w][f] is compared against windows[w].target[f]; each forecast
// step is pooled across windows, overall and split by day class.
EvalReport aggregate_report(const std::vector<SupervisedWindow>& windows,
                            const std::vector<std::vector<CountGrid>>& forecasts,
                            const HolidayCalendar& calendar, int horizon);

// Repeats each window's last input day across the horizon.
std::vector<std::vector<CountGrid>> persistence_forecast(
    const std::vector<SupervisedWindow>& windows, int horizon);

// Per-weekday mean raster over a training slice.
struct HistoricalAverage {
  std::vector<CountGrid> by_weekday;  // 7 entries, Monday first
};

HistoricalAverage historical_average_fit(const std::vector<VisitCountRaster>& train_days);
std::vector<std::vector<CountGrid>> historical_average_forecast(
    const HistoricalAverage& model, const std::vector<SupervisedWindow>& windows, int horizon);

// The naive raster of each target day, as a reference forecaster.
std::vector<std::vector<CountGrid>> naive_forecast(const std::vector<SupervisedWindow>& windows,
                                                   int horizon);

}  // namespace gadst
