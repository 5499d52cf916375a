#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gadst/artifacts.hpp"
#include "gadst/config.hpp"
#include "gadst/error.hpp"
#include "gadst/evaluation.hpp"
#include "gadst/ingest.hpp"
#include "gadst/model.hpp"
#include "gadst/quadtree.hpp"
#include "gadst/synth.hpp"

namespace fs = std::filesystem;
using namespace gadst;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string workdir;
  std::string data_root;
  std::optional<uint64_t> seed;
};

RunConfig resolve_config(const GlobalOpts& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  if (!opts.workdir.empty()) cfg.workdir = opts.workdir;
  if (!opts.data_root.empty()) cfg.data_dir = opts.data_root;
  if (opts.seed) cfg.hyper.seed = *opts.seed;
  cfg.validate();
  return cfg;
}

std::string resolve_data_root(const RunConfig& cfg) {
  if (!cfg.data_dir.empty()) return cfg.data_dir;
  if (const char* env = std::getenv("GADST_DATA_ROOT"); env && *env) return env;
  throw IoError("no data root: pass --data, set data_dir in the config, or export GADST_DATA_ROOT");
}

RasterizeResult load_raw(const RunConfig& cfg) {
  if (cfg.dataset == "synth") {
    RasterizeResult res;
    res.series = synth_generate(cfg.synth, cfg.hyper.seed);
    res.binned = static_cast<int64_t>(res.series.days.size());
    return res;
  }
  const std::string root = resolve_data_root(cfg);
  if (!cfg.date_min || !cfg.date_max)
    throw ConfigError("geolife runs need date_min and date_max in the config");
  const std::vector<TracePoint> points = load_geolife_user(root, cfg.user);
  return rasterize(points, cfg.grid, *cfg.date_min, *cfg.date_max, cfg.utc_offset_minutes);
}

struct Prepared {
  RasterizeResult raw;
  DailySeries scaled;
  HolidayCalendar calendar;
  std::vector<ExtFeature> ext;
};

Prepared prepare_series(const RunConfig& cfg) {
  Prepared p;
  p.raw = load_raw(cfg);
  p.scaled = scale_unit(impute_missing(p.raw.series));
  p.calendar = HolidayCalendar(effective_holidays(cfg));
  std::vector<Date> dates;
  dates.reserve(p.scaled.days.size());
  for (const VisitCountRaster& d : p.scaled.days) dates.push_back(d.date);
  p.ext = external_features(dates, p.calendar, UserMeta{cfg.employed});
  return p;
}

struct SplitWindows {
  std::vector<SupervisedWindow> windows;
  size_t n_train = 0;
};

SplitWindows split_windows(const RunConfig& cfg, const DailySeries& scaled,
                           const std::vector<ExtFeature>& ext) {
  SplitWindows s;
  s.windows = make_windows(scaled, ext);
  s.n_train = static_cast<size_t>(cfg.train_frac * static_cast<double>(s.windows.size()));
  if (s.n_train < 1)
    throw InsufficientDataError("train_frac leaves no training windows out of " +
                                std::to_string(s.windows.size()));
  return s;
}

int effective_max_level(const RunConfig& cfg, const DailySeries& series) {
  return cfg.max_level >= 0 ? cfg.max_level : default_max_level(series.rows(), series.cols());
}

std::span<const VisitCountRaster> training_days(const DailySeries& scaled, size_t n_train) {
  return {scaled.days.data(), n_train + 20};
}

fs::path ensure_workdir(const RunConfig& cfg) {
  fs::path dir(cfg.workdir);
  fs::create_directories(dir);
  return dir;
}

DailySeries read_workdir_series(const fs::path& dir) {
  const fs::path p = dir / "series_scaled.txt";
  if (!fs::exists(p)) throw IoError("missing " + p.string() + "; run the train command first");
  return read_series_file(p.string());
}

GeoIndexTable read_workdir_table(const fs::path& dir) {
  const fs::path p = dir / "geo_index.txt";
  if (!fs::exists(p)) throw IoError("missing " + p.string() + "; run the train command first");
  std::ifstream in(p);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return table_from_text(text);
}

void unscale_window(SupervisedWindow& w, double scale_max) {
  for (auto* part : {&w.week_a, &w.week_b, &w.target})
    for (VisitCountRaster& d : *part) d.grid = unscale(d.grid, scale_max);
}

int cmd_synth(const GlobalOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  const DailySeries series = synth_generate(cfg.synth, cfg.hyper.seed);
  const fs::path dir = ensure_workdir(cfg);
  const fs::path out = dir / "series_raw.txt";
  write_series_file(series, out.string());
  std::cout << "wrote " << out.string() << " (" << series.days.size() << " days)\n";
  return 0;
}

int cmd_ingest(const GlobalOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  Prepared p = prepare_series(cfg);
  const IngestSummary sum =
      summarize(p.scaled, p.calendar, p.raw.dropped_bbox, p.raw.dropped_range);

  const fs::path dir = ensure_workdir(cfg);
  write_series_file(p.scaled, (dir / "series_scaled.txt").string());
  write_summary_file(sum, (dir / "summary.txt").string());
  std::cout << "user " << sum.user_id << ": " << sum.days << " days (" << sum.weekdays
            << " weekdays, " << sum.weekends_holidays << " weekends/holidays, "
            << (sum.missing_weekdays + sum.missing_weekends) << " imputed)\n";
  std::cout << "dropped " << sum.dropped_bbox << " outside the box, " << sum.dropped_range
            << " outside the date range\n";
  std::cout << "scale_max " << fmt_g17(sum.scale_max) << "\n";
  std::cout << "wrote " << (dir / "series_scaled.txt").string() << "\n";
  std::cout << "wrote " << (dir / "summary.txt").string() << "\n";
  return 0;
}

int cmd_tree(const GlobalOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  Prepared p = prepare_series(cfg);
  SplitWindows sw = split_windows(cfg, p.scaled, p.ext);
  const UniversalIndex index =
      build_universal_index(training_days(p.scaled, sw.n_train), effective_max_level(cfg, p.scaled));

  const fs::path dir = ensure_workdir(cfg);
  write_text_file((dir / "geo_index.txt").string(), table_to_text(index.table));
  std::string quadlist;
  for (const MortonKey& k : index.quadlist) {
    quadlist += k.level == 0 ? "-" : k.path();
    quadlist += "\n";
  }
  write_text_file((dir / "quadlist.txt").string(), quadlist);
  std::cout << "index: " << index.table.entries.size() << " nodes, " << index.table.flat_len()
            << " cells of " << p.scaled.rows() << "x" << p.scaled.cols() << "\n";
  std::cout << "wrote " << (dir / "geo_index.txt").string() << "\n";
  std::cout << "wrote " << (dir / "quadlist.txt").string() << "\n";
  return 0;
}

int cmd_train(const GlobalOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  Prepared p = prepare_series(cfg);
  SplitWindows sw = split_windows(cfg, p.scaled, p.ext);
  const UniversalIndex index =
      build_universal_index(training_days(p.scaled, sw.n_train), effective_max_level(cfg, p.scaled));

  std::vector<SupervisedWindow> train_set(sw.windows.begin(),
                                          sw.windows.begin() + static_cast<int64_t>(sw.n_train));
  std::vector<SupervisedWindow> val_set(sw.windows.begin() + static_cast<int64_t>(sw.n_train),
                                        sw.windows.end());
  std::cout << "windows " << sw.windows.size() << " (train " << train_set.size() << ", held-out "
            << val_set.size() << "); index " << index.table.entries.size() << " nodes, "
            << index.table.flat_len() << " cells\n";

  GadstModel model(index.table, cfg.hyper);
  model.set_scale_max(p.scaled.scale_max.value_or(1.0));
  const FitResult fit_res = fit(model, train_set, val_set);

  const fs::path dir = ensure_workdir(cfg);
  write_series_file(p.scaled, (dir / "series_scaled.txt").string());
  write_summary_file(summarize(p.scaled, p.calendar, p.raw.dropped_bbox, p.raw.dropped_range),
                     (dir / "summary.txt").string());
  write_text_file((dir / "geo_index.txt").string(), table_to_text(index.table));
  write_history_csv_file(fit_res.history, (dir / "history.csv").string());
  save_checkpoint(model, (dir / "model.ckpt").string());

  if (!fit_res.history.empty()) {
    const EpochStats& last = fit_res.history.back();
    std::cout << "final train_loss " << fmt_g17(last.train_loss) << " val_loss "
              << fmt_g17(last.val_loss) << " best_epoch "
              << (fit_res.best_epoch >= 0 ? std::to_string(fit_res.best_epoch + 1) : "-") << "\n";
  }
  std::cout << "wrote " << (dir / "model.ckpt").string() << "\n";
  std::cout << "wrote " << (dir / "history.csv").string() << "\n";
  return 0;
}

int cmd_evaluate(const GlobalOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  const fs::path dir = ensure_workdir(cfg);
  const DailySeries scaled = read_workdir_series(dir);
  const GeoIndexTable table = read_workdir_table(dir);
  const double scale_max = scaled.scale_max.value_or(1.0);

  const HolidayCalendar calendar{effective_holidays(cfg)};
  std::vector<Date> dates;
  for (const VisitCountRaster& d : scaled.days) dates.push_back(d.date);
  const std::vector<ExtFeature> ext = external_features(dates, calendar, UserMeta{cfg.employed});
  SplitWindows sw = split_windows(cfg, scaled, ext);
  if (sw.n_train >= sw.windows.size())
    throw InsufficientDataError("train_frac leaves no held-out windows to evaluate");

  GadstModel model(table, cfg.hyper);
  load_checkpoint(model, (dir / "model.ckpt").string());

  std::vector<SupervisedWindow> eval_scaled(sw.windows.begin() + static_cast<int64_t>(sw.n_train),
                                            sw.windows.end());
  std::vector<SupervisedWindow> eval_counts = eval_scaled;
  for (SupervisedWindow& w : eval_counts) unscale_window(w, scale_max);

  std::vector<std::vector<CountGrid>> model_fc;
  model_fc.reserve(eval_scaled.size());
  for (const SupervisedWindow& w : eval_scaled) model_fc.push_back(predict(model, w));

  std::vector<VisitCountRaster> train_days_counts(
      scaled.days.begin(), scaled.days.begin() + static_cast<int64_t>(sw.n_train) + 20);
  for (VisitCountRaster& d : train_days_counts) d.grid = unscale(d.grid, scale_max);

  const int H = cfg.hyper.horizon;
  const HistoricalAverage ha = historical_average_fit(train_days_counts);
  const auto reports = {
      std::make_pair(std::string("model"), aggregate_report(eval_counts, model_fc, calendar, H)),
      std::make_pair(std::string("persistence"),
                     aggregate_report(eval_counts, persistence_forecast(eval_counts, H), calendar,
                                      H)),
      std::make_pair(std::string("historical_average"),
                     aggregate_report(eval_counts,
                                      historical_average_forecast(ha, eval_counts, H), calendar,
                                      H)),
      std::make_pair(std::string("naive"),
                     aggregate_report(eval_counts, naive_forecast(eval_counts, H), calendar, H)),
  };
  for (const auto& [name, report] : reports) {
    const fs::path out = dir / ("report_" + name + ".csv");
    write_report_csv_file(report, out.string());
    std::cout << name << " overall norm_precision";
    for (const MetricStat& st : report.splits.front().norm_precision)
      std::cout << " " << fmt_g17(st.mean);
    std::cout << "\n";
  }
  std::cout << "evaluated " << eval_counts.size() << " held-out windows\n";
  return 0;
}

int cmd_predict(const GlobalOpts& opts, const std::string& date_str) {
  RunConfig cfg = resolve_config(opts);
  const fs::path dir = ensure_workdir(cfg);
  const DailySeries scaled = read_workdir_series(dir);
  const GeoIndexTable table = read_workdir_table(dir);

  GadstModel model(table, cfg.hyper);
  load_checkpoint(model, (dir / "model.ckpt").string());

  const Date first = scaled.days.front().date;
  const Date start = date_str.empty() ? scaled.days.back().date + 1 : Date::parse(date_str);
  const int64_t idx = start - first;
  const int64_t n = static_cast<int64_t>(scaled.days.size());
  if (idx < 14 || idx > n)
    throw InsufficientDataError("series does not cover the 14 days before " + start.str());

  SupervisedWindow w;
  w.week_a.assign(scaled.days.begin() + idx - 14, scaled.days.begin() + idx - 7);
  w.week_b.assign(scaled.days.begin() + idx - 7, scaled.days.begin() + idx);
  const HolidayCalendar calendar{effective_holidays(cfg)};
  std::vector<Date> target_dates;
  for (int f = 0; f < cfg.hyper.horizon; ++f) target_dates.push_back(start + f);
  w.ext = external_features(target_dates, calendar, UserMeta{cfg.employed});

  const std::vector<CountGrid> forecast = predict(model, w);
  write_forecast_csv_file(target_dates, forecast, (dir / "forecast.csv").string());
  for (size_t f = 0; f < forecast.size(); ++f) {
    const std::string name = "forecast_" + target_dates[f].str() + ".svg";
    write_text_file((dir / name).string(),
                    svg_heatmap(forecast[f], target_dates[f].str()));
    std::cout << target_dates[f].str() << " total " << fmt_g17(forecast[f].sum()) << "\n";
  }
  std::cout << "wrote " << (dir / "forecast.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quadtree-indexed daily mobility forecasting"};
  app.require_subcommand(1);

  GlobalOpts opts;
  uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "override the run seed");
  app.add_option("--config", opts.config_path, "key = value run configuration file");
  app.add_option("--workdir", opts.workdir, "artifact directory");
  app.add_option("--data", opts.data_root, "dataset root directory");

  auto* synth = app.add_subcommand("synth", "generate a synthetic daily series");
  auto* ingest = app.add_subcommand("ingest", "build the scaled daily series and summary");
  auto* tree = app.add_subcommand("tree", "build the universal quadtree index");
  auto* train = app.add_subcommand("train", "fit the forecasting model");
  auto* evaluate = app.add_subcommand("evaluate", "score held-out windows against baselines");
  auto* predict_cmd = app.add_subcommand("predict", "forecast a week from the stored model");
  std::string date_str;
  predict_cmd->add_option("--date", date_str, "first forecast day, YYYY-MM-DD");
  for (CLI::App* sub : {synth, ingest, tree, train, evaluate, predict_cmd}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  if (seed_opt->count() > 0) opts.seed = seed_value;

  try {
    if (synth->parsed()) return cmd_synth(opts);
    if (ingest->parsed()) return cmd_ingest(opts);
    if (tree->parsed()) return cmd_tree(opts);
    if (train->parsed()) return cmd_train(opts);
    if (evaluate->parsed()) return cmd_evaluate(opts);
    if (predict_cmd->parsed()) return cmd_predict(opts, date_str);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
