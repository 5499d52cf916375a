#include "gadst/date.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>

#include "gadst/error.hpp"

namespace gadst {

namespace chr = std::chrono;

static chr::year_month_day to_ymd(Date d) {
  return chr::year_month_day{chr::sys_days{chr::days{d.days}}};
}

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  if (!ymd.ok()) throw ValidationError("invalid calendar date");
  return Date{static_cast<int32_t>(chr::sys_days{ymd}.time_since_epoch().count())};
}

static int parse_int(std::string_view s, const char* what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw ParseError(std::string("bad ") + what + ": '" + std::string(s) + "'");
  return v;
}

Date Date::parse(std::string_view s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-')
    throw ParseError("bad date '" + std::string(s) + "', expected YYYY-MM-DD");
  int y = parse_int(s.substr(0, 4), "year");
  int m = parse_int(s.substr(5, 2), "month");
  int d = parse_int(s.substr(8, 2), "day");
  return from_ymd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

int Date::year() const { return static_cast<int>(to_ymd(*this).year()); }
unsigned Date::month() const { return static_cast<unsigned>(to_ymd(*this).month()); }
unsigned Date::day() const { return static_cast<unsigned>(to_ymd(*this).day()); }

int Date::weekday() const {
  chr::weekday wd{chr::sys_days{chr::days{days}}};
  // iso_encoding: Mon=1..Sun=7
  return static_cast<int>(wd.iso_encoding()) - 1;
}

std::string Date::str() const {
  auto ymd = to_ymd(*this);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

Date Timestamp::civil_date(int utc_offset_minutes) const {
  int64_t shifted = secs + int64_t{utc_offset_minutes} * 60;
  // floor division: dates before the epoch round toward -inf
  int64_t day = shifted / 86400;
  if (shifted % 86400 < 0) --day;
  return Date{static_cast<int32_t>(day)};
}

Timestamp parse_timestamp(std::string_view date, std::string_view time) {
  Date d = Date::parse(date);
  if (time.size() != 8 || time[2] != ':' || time[5] != ':')
    throw ParseError("bad time '" + std::string(time) + "', expected HH:MM:SS");
  int h = parse_int(time.substr(0, 2), "hour");
  int m = parse_int(time.substr(3, 2), "minute");
  int s = parse_int(time.substr(6, 2), "second");
  if (h < 0 || h > 23 || m < 0 || m > 59 || s < 0 || s > 60)
    throw ValidationError("time of day out of range: '" + std::string(time) + "'");
  return Timestamp{int64_t{d.days} * 86400 + h * 3600 + m * 60 + s};
}

Timestamp parse_timestamp_iso(std::string_view s) {
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.remove_suffix(1);
  if (s.size() != 19 || (s[10] != 'T' && s[10] != ' '))
    throw ParseError("bad timestamp '" + std::string(s) + "'");
  return parse_timestamp(s.substr(0, 10), s.substr(11, 8));
}

HolidayCalendar::HolidayCalendar(std::vector<Date> dates) : dates_(std::move(dates)) {
  std::sort(dates_.begin(), dates_.end());
  dates_.erase(std::unique(dates_.begin(), dates_.end()), dates_.end());
}

void HolidayCalendar::add(Date d) {
  auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.end() || *it != d) dates_.insert(it, d);
}

bool HolidayCalendar::is_holiday(Date d) const {
  return std::binary_search(dates_.begin(), dates_.end(), d);
}

}  // namespace gadst
