#include "gadst/artifacts.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gadst/error.hpp"

namespace gadst {

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

constexpr const char* kSeriesMagic = "gadst-series 1";

void open_out(std::ofstream& out, const std::string& path) {
  out.open(path, std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
}

void finish_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("failed writing file: " + path);
}

[[noreturn]] void series_error(int64_t line_no, const std::string& why) {
  throw ParseError("series line " + std::to_string(line_no) + ": " + why);
}

struct LineReader {
  std::istream& in;
  int64_t line_no = 0;

  std::string next(const char* what) {
    std::string line;
    if (!std::getline(in, line)) series_error(line_no, std::string("expected ") + what);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }
};

double parse_num(const std::string& s, int64_t line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') series_error(line_no, "bad number '" + s + "'");
  return v;
}

}  // namespace

void write_series(const DailySeries& s, std::ostream& out) {
  out << kSeriesMagic << "\n";
  out << "user " << s.user_id << "\n";
  out << "grid " << s.rows() << " " << s.cols() << "\n";
  out << "bounds " << fmt_g17(s.area.lat_min) << " " << fmt_g17(s.area.lat_max) << " "
      << fmt_g17(s.area.lon_min) << " " << fmt_g17(s.area.lon_max) << "\n";
  out << "scale_max " << (s.scale_max ? fmt_g17(*s.scale_max) : std::string("none")) << "\n";
  out << "days " << s.days.size() << "\n";
  for (const VisitCountRaster& d : s.days) {
    out << "day " << d.day_index << " " << d.date.str() << " " << (d.imputed ? 1 : 0) << "\n";
    for (int r = 0; r < d.grid.rows; ++r) {
      for (int c = 0; c < d.grid.cols; ++c) {
        if (c) out << " ";
        out << fmt_g17(d.grid.at(r, c));
      }
      out << "\n";
    }
  }
}

void write_series_file(const DailySeries& s, const std::string& path) {
  std::ofstream out;
  open_out(out, path);
  write_series(s, out);
  finish_out(out, path);
}

DailySeries read_series(std::istream& in) {
  LineReader lr{in};
  if (lr.next("header") != kSeriesMagic) series_error(1, "not a series file");

  DailySeries s;
  int rows = 0, cols = 0;
  int64_t day_count = 0;
  {
    std::istringstream ss(lr.next("user line"));
    std::string tag;
    ss >> tag;
    if (tag != "user") series_error(lr.line_no, "expected 'user'");
    ss >> s.user_id;  // may stay empty
  }
  {
    std::istringstream ss(lr.next("grid line"));
    std::string tag;
    ss >> tag >> rows >> cols;
    if (tag != "grid" || ss.fail() || rows < 1 || cols < 1)
      series_error(lr.line_no, "bad grid line");
    s.area.rows = rows;
    s.area.cols = cols;
  }
  {
    std::istringstream ss(lr.next("bounds line"));
    std::string tag;
    ss >> tag >> s.area.lat_min >> s.area.lat_max >> s.area.lon_min >> s.area.lon_max;
    if (tag != "bounds" || ss.fail()) series_error(lr.line_no, "bad bounds line");
  }
  {
    std::istringstream ss(lr.next("scale_max line"));
    std::string tag, value;
    ss >> tag >> value;
    if (tag != "scale_max" || ss.fail()) series_error(lr.line_no, "bad scale_max line");
    if (value != "none") s.scale_max = parse_num(value, lr.line_no);
  }
  {
    std::istringstream ss(lr.next("days line"));
    std::string tag;
    ss >> tag >> day_count;
    if (tag != "days" || ss.fail() || day_count < 0) series_error(lr.line_no, "bad days line");
  }

  for (int64_t i = 0; i < day_count; ++i) {
    std::istringstream ss(lr.next("day line"));
    std::string tag, date_str;
    int day_index = 0, imputed = 0;
    ss >> tag >> day_index >> date_str >> imputed;
    if (tag != "day" || ss.fail() || (imputed != 0 && imputed != 1))
      series_error(lr.line_no, "bad day line");
    VisitCountRaster d;
    try {
      d.date = Date::parse(date_str);
    } catch (const ParseError& e) {
      series_error(lr.line_no, e.what());
    }
    d.day_index = day_index;
    d.imputed = imputed != 0;
    d.grid = CountGrid(rows, cols);
    for (int r = 0; r < rows; ++r) {
      std::istringstream row(lr.next("raster row"));
      for (int c = 0; c < cols; ++c) {
        std::string cell;
        if (!(row >> cell)) series_error(lr.line_no, "short raster row");
        d.grid.at(r, c) = parse_num(cell, lr.line_no);
      }
      std::string extra;
      if (row >> extra) series_error(lr.line_no, "long raster row");
    }
    s.days.push_back(std::move(d));
  }
  return s;
}

DailySeries read_series_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open series file: " + path);
  try {
    return read_series(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_summary(const IngestSummary& s, std::ostream& out) {
  out << "user " << s.user_id << "\n";
  out << "days " << s.days << "\n";
  out << "weekdays " << s.weekdays << "\n";
  out << "weekends_holidays " << s.weekends_holidays << "\n";
  out << "missing_weekdays " << s.missing_weekdays << "\n";
  out << "missing_weekends " << s.missing_weekends << "\n";
  out << "dropped_bbox " << s.dropped_bbox << "\n";
  out << "dropped_range " << s.dropped_range << "\n";
  out << "scale_max " << fmt_g17(s.scale_max) << "\n";
}

void write_summary_file(const IngestSummary& s, const std::string& path) {
  std::ofstream out;
  open_out(out, path);
  write_summary(s, out);
  finish_out(out, path);
}

void write_history_csv(const std::vector<EpochStats>& history, std::ostream& out) {
  out << "epoch,train_loss,val_loss\n";
  for (size_t i = 0; i < history.size(); ++i)
    out << (i + 1) << "," << fmt_g17(history[i].train_loss) << ","
        << fmt_g17(history[i].val_loss) << "\n";
}

void write_history_csv_file(const std::vector<EpochStats>& history, const std::string& path) {
  std::ofstream out;
  open_out(out, path);
  write_history_csv(history, out);
  finish_out(out, path);
}

void write_report_csv(const EvalReport& report, std::ostream& out) {
  out << "split,metric";
  for (int f = 1; f <= report.horizon; ++f) out << ",f" << f;
  out << "\n";
  for (const SplitReport& s : report.splits) {
    const auto row = [&](const char* metric, const std::vector<MetricStat>& stats, bool mean) {
      out << s.split << "," << metric;
      for (const MetricStat& st : stats) out << "," << fmt_g17(mean ? st.mean : st.std_dev);
      out << "\n";
    };
    row("norm_precision_mean", s.norm_precision, true);
    row("norm_precision_std", s.norm_precision, false);
    row("norm_recall_mean", s.norm_recall, true);
    row("norm_recall_std", s.norm_recall, false);
  }
}

void write_report_csv_file(const EvalReport& report, const std::string& path) {
  std::ofstream out;
  open_out(out, path);
  write_report_csv(report, out);
  finish_out(out, path);
}

void write_forecast_csv(const std::vector<Date>& dates, const std::vector<CountGrid>& days,
                        std::ostream& out) {
  if (dates.size() != days.size())
    throw ValidationError("forecast needs one date per raster");
  out << "date,row,col,value\n";
  for (size_t i = 0; i < days.size(); ++i)
    for (int r = 0; r < days[i].rows; ++r)
      for (int c = 0; c < days[i].cols; ++c)
        out << dates[i].str() << "," << r << "," << c << "," << fmt_g17(days[i].at(r, c)) << "\n";
}

void write_forecast_csv_file(const std::vector<Date>& dates, const std::vector<CountGrid>& days,
                             const std::string& path) {
  std::ofstream out;
  open_out(out, path);
  write_forecast_csv(dates, days, out);
  finish_out(out, path);
}

std::string svg_heatmap(const CountGrid& grid, const std::string& title) {
  const int cell = 24, margin = 2;
  const int width = margin * 2 + grid.cols * cell;
  const int height = margin * 2 + grid.rows * cell + (title.empty() ? 0 : 20);
  const int top = margin + (title.empty() ? 0 : 20);
  const double peak = grid.max();

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  if (!title.empty())
    out << "  <text x=\"" << margin << "\" y=\"14\" font-family=\"monospace\" font-size=\"12\">"
        << title << "</text>\n";
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const double t = peak > 0 ? grid.at(r, c) / peak : 0.0;
      // white (255,255,255) to dark blue (8,48,107)
      const int red = static_cast<int>(255 + t * (8 - 255));
      const int green = static_cast<int>(255 + t * (48 - 255));
      const int blue = static_cast<int>(255 + t * (107 - 255));
      char color[8];
      std::snprintf(color, sizeof color, "#%02x%02x%02x", red, green, blue);
      out << "  <rect x=\"" << (margin + c * cell) << "\" y=\"" << (top + r * cell) << "\" width=\""
          << cell << "\" height=\"" << cell << "\" fill=\"" << color << "\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out;
  open_out(out, path);
  out << content;
  finish_out(out, path);
}

}  // namespace gadst
