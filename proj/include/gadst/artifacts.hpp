#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "gadst/evaluation.hpp"
#include "gadst/ingest.hpp"
#include "gadst/model.hpp"
#include "gadst/raster.hpp"

namespace gadst {

// Shortest-repr double formatting used by every text artifact.
std::string fmt_g17(double v);

// Daily-series text format, versioned and round-trippable.
void write_series(const DailySeries& s, std::ostream& out);
void write_series_file(const DailySeries& s, const std::string& path);
DailySeries read_series(std::istream& in);
DailySeries read_series_file(const std::string& path);

void write_summary(const IngestSummary& s, std::ostream& out);
void write_summary_file(const IngestSummary& s, const std::string& path);

// epoch,train_loss,val_loss rows, 1-based epochs.
void write_history_csv(const std::vector<EpochStats>& history, std::ostream& out);
void write_history_csv_file(const std::vector<EpochStats>& history, const std::string& path);

// split,metric,f1..fH rows with mean/std per forecast step.
void write_report_csv(const EvalReport& report, std::ostream& out);
void write_report_csv_file(const EvalReport& report, const std::string& path);

// date,row,col,value rows for a forecast sequence.
void write_forecast_csv(const std::vector<Date>& dates, const std::vector<CountGrid>& days,
                        std::ostream& out);
void write_forecast_csv_file(const std::vector<Date>& dates, const std::vector<CountGrid>& days,
                             const std::string& path);

// Static heatmap, white through dark blue, one rect per cell.
std::string svg_heatmap(const CountGrid& grid, const std::string& title);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace gadst
