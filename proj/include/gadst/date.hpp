#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gadst {

// Proleptic Gregorian calendar date, stored as days since 1970-01-01.
struct Date {
  int32_t days = 0;

  static Date from_ymd(int year, unsigned month, unsigned day);
  static Date parse(std::string_view s);  // "YYYY-MM-DD"

  int year() const;
  unsigned month() const;
  unsigned day() const;

  // 0 = Monday .. 6 = Sunday
  int weekday() const;
  bool is_weekend() const { return weekday() >= 5; }

  std::string str() const;

  Date operator+(int n) const { return Date{days + n}; }
  Date operator-(int n) const { return Date{days - n}; }
  int operator-(Date o) const { return days - o.days; }
  Date& operator++() { ++days; return *this; }
  auto operator<=>(const Date&) const = default;
};

// Seconds since the Unix epoch, UTC.
struct Timestamp {
  int64_t secs = 0;

  // Calendar day after shifting into a fixed civil offset (minutes east of UTC).
  Date civil_date(int utc_offset_minutes) const;

  auto operator<=>(const Timestamp&) const = default;
};

// Parse "YYYY-MM-DD" + "HH:MM:SS" wall-clock fields interpreted as UTC.
Timestamp parse_timestamp(std::string_view date, std::string_view time);
// Parse "YYYY-MM-DDTHH:MM:SS" (optional trailing 'Z').
Timestamp parse_timestamp_iso(std::string_view s);

class HolidayCalendar {
 public:
  HolidayCalendar() = default;
  explicit HolidayCalendar(std::vector<Date> dates);
  void add(Date d);

  bool is_holiday(Date d) const;
  bool weekend_or_holiday(Date d) const { return d.is_weekend() || is_holiday(d); }

  const std::vector<Date>& dates() const { return dates_; }

 private:
  std::vector<Date> dates_;  // sorted, unique
};

}  // namespace gadst
