#include "gadst/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gadst/error.hpp"

namespace gadst {

OverlapMetrics overlap_metrics(const CountGrid& truth, const CountGrid& pred) {
  if (truth.rows != pred.rows || truth.cols != pred.cols)
    throw ShapeError("metric rasters disagree in shape");
  double overlap = 0, tsum = 0, psum = 0;
  for (size_t k = 0; k < truth.v.size(); ++k) {
    overlap += std::min(truth.v[k], pred.v[k]);
    tsum += truth.v[k];
    psum += pred.v[k];
  }
  OverlapMetrics m;
  if (tsum > 0) m.recall = overlap / tsum;
  if (psum > 0) m.precision = overlap / psum;
  return m;
}

CountGrid naive_predict(const CountGrid& truth) {
  CountGrid out(truth.rows, truth.cols);
  const double level = truth.sum() / static_cast<double>(truth.size());
  for (double& v : out.v) v = level;
  return out;
}

NormalizedMetrics normalized_metrics(const CountGrid& truth, const CountGrid& pred) {
  const OverlapMetrics raw = overlap_metrics(truth, pred);
  const OverlapMetrics base = overlap_metrics(truth, naive_predict(truth));
  NormalizedMetrics m;
  if (raw.recall && base.recall) m.norm_recall = *raw.recall - *base.recall;
  if (raw.precision && base.precision) m.norm_precision = *raw.precision - *base.precision;
  return m;
}

namespace {

MetricStat pool(const std::vector<double>& samples) {
  MetricStat s;
  s.count = static_cast<int64_t>(samples.size());
  if (samples.empty()) {
    s.mean = s.std_dev = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0;
  for (double v : samples) sum += v;
  s.mean = sum / static_cast<double>(samples.size());
  double sq = 0;
  for (double v : samples) sq += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(sq / static_cast<double>(samples.size()));
  return s;
}

}  // namespace

EvalReport aggregate_report(const std::vector<SupervisedWindow>& windows,
                            const std::vector<std::vector<CountGrid>>& forecasts,
                            const HolidayCalendar& calendar, int horizon) {
  if (windows.size() != forecasts.size())
    throw ValidationError("one forecast sequence per window is required");
  if (horizon < 1) throw ValidationError("horizon must be >= 1");

  EvalReport report;
  report.horizon = horizon;
  // split 0: overall, 1: weekdays, 2: weekends and holidays
  const char* names[3] = {"overall", "weekdays", "weekends"};
  std::vector<double> recall_samples[3], precision_samples[3];

  for (int s = 0; s < 3; ++s) report.splits.push_back(SplitReport{names[s], {}, {}});

  for (int f = 0; f < horizon; ++f) {
    for (int s = 0; s < 3; ++s) {
      recall_samples[s].clear();
      precision_samples[s].clear();
    }
    for (size_t w = 0; w < windows.size(); ++w) {
      if (static_cast<int>(windows[w].target.size()) != horizon ||
          static_cast<int>(forecasts[w].size()) != horizon)
        throw ValidationError("window " + std::to_string(w) +
                              " does not cover the full horizon");
      const VisitCountRaster& truth = windows[w].target[static_cast<size_t>(f)];
      const NormalizedMetrics m =
          normalized_metrics(truth.grid, forecasts[w][static_cast<size_t>(f)]);
      const int cls = calendar.weekend_or_holiday(truth.date) ? 2 : 1;
      if (m.norm_recall) {
        recall_samples[0].push_back(*m.norm_recall);
        recall_samples[cls].push_back(*m.norm_recall);
      }
      if (m.norm_precision) {
        precision_samples[0].push_back(*m.norm_precision);
        precision_samples[cls].push_back(*m.norm_precision);
      }
    }
    for (int s = 0; s < 3; ++s) {
      report.splits[static_cast<size_t>(s)].norm_recall.push_back(pool(recall_samples[s]));
      report.splits[static_cast<size_t>(s)].norm_precision.push_back(pool(precision_samples[s]));
    }
  }
  return report;
}

std::vector<std::vector<CountGrid>> persistence_forecast(
    const std::vector<SupervisedWindow>& windows, int horizon) {
  std::vector<std::vector<CountGrid>> out;
  out.reserve(windows.size());
  for (const SupervisedWindow& w : windows) {
    if (w.week_b.empty()) throw ValidationError("persistence needs a nonempty input week");
    out.emplace_back(static_cast<size_t>(horizon), w.week_b.back().grid);
  }
  return out;
}

HistoricalAverage historical_average_fit(const std::vector<VisitCountRaster>& train_days) {
  if (train_days.empty()) throw InsufficientDataError("historical average needs training days");
  const int rows = train_days.front().grid.rows, cols = train_days.front().grid.cols;
  HistoricalAverage model;
  model.by_weekday.assign(7, CountGrid(rows, cols));
  int counts[7] = {};
  for (const VisitCountRaster& d : train_days) {
    if (d.grid.rows != rows || d.grid.cols != cols)
      throw ShapeError("training rasters disagree in shape");
    const int w = d.date.weekday();
    for (size_t k = 0; k < d.grid.v.size(); ++k) model.by_weekday[static_cast<size_t>(w)].v[k] += d.grid.v[k];
    ++counts[w];
  }
  for (int w = 0; w < 7; ++w) {
    if (counts[w] == 0)
      throw InsufficientDataError("historical average saw no day with weekday index " +
                                  std::to_string(w));
    for (double& v : model.by_weekday[static_cast<size_t>(w)].v) v /= counts[w];
  }
  return model;
}

std::vector<std::vector<CountGrid>> historical_average_forecast(
    const HistoricalAverage& model, const std::vector<SupervisedWindow>& windows, int horizon) {
  if (model.by_weekday.size() != 7)
    throw ValidationError("historical average model must cover all weekdays");
  std::vector<std::vector<CountGrid>> out;
  out.reserve(windows.size());
  for (const SupervisedWindow& w : windows) {
    std::vector<CountGrid> seq;
    seq.reserve(static_cast<size_t>(horizon));
    for (int f = 0; f < horizon; ++f) {
      if (f >= static_cast<int>(w.target.size()))
        throw ValidationError("window target does not cover the horizon");
      seq.push_back(model.by_weekday[static_cast<size_t>(w.target[static_cast<size_t>(f)].date.weekday())]);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<std::vector<CountGrid>> naive_forecast(const std::vector<SupervisedWindow>& windows,
                                                   int horizon) {
  std::vector<std::vector<CountGrid>> out;
  out.reserve(windows.size());
  for (const SupervisedWindow& w : windows) {
    std::vector<CountGrid> seq;
    for (int f = 0; f < horizon; ++f) {
      if (f >= static_cast<int>(w.target.size()))
        throw ValidationError("window target does not cover the horizon");
      seq.push_back(naive_predict(w.target[static_cast<size_t>(f)].grid));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace gadst
