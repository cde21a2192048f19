#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epf/matrix.hpp"

namespace epf::data {

struct CivilDate {
  int year = 1970;
  int month = 1;
  int day = 1;
  bool operator==(const CivilDate&) const = default;
};

// Days since 1970-01-01 (Hinnant's civil-days algorithm).
std::int64_t days_from_civil(const CivilDate& d);
CivilDate civil_from_days(std::int64_t z);
int weekday_from_days(std::int64_t z);  // 0 = Monday ... 6 = Sunday
CivilDate add_days(const CivilDate& d, int n);
std::string to_string(const CivilDate& d);
CivilDate parse_date(const std::string& s);  // "YYYY-MM-DD"

// Civil wall-clock timestamp plus the UTC offset it was recorded with.
// The hourly grid and the daily-by-hour matrices live in civil time; the
// offset only matters while repairing DST irregularities.
struct Timestamp {
  CivilDate date;
  int hour = 0;
  int minute = 0;
  int offset_min = 0;
  std::int64_t civil_hour_index() const { return days_from_civil(date) * 24 + hour; }
};

// "2023-03-26T02:00:00+01:00" with optional seconds, 'Z', or no offset.
Timestamp parse_timestamp(const std::string& s);
std::string format_timestamp(const Timestamp& t);

// Hourly market panel: price plus its drivers on one civil-time grid.
// Daily series (fuels, EUA) are forward-filled onto the hourly grid.
struct HourlyPanel {
  std::vector<Timestamp> times;
  std::vector<double> price;      // EUR/MWh
  std::vector<double> load_fc;    // MWh
  std::vector<double> wind_on;    // MWh
  std::vector<double> wind_off;   // MWh
  std::vector<double> solar_fc;   // MWh
  std::vector<double> coal;       // EUR/t
  std::vector<double> gas;        // EUR/MWh
  std::vector<double> oil;        // EUR/bbl
  std::vector<double> eua;        // EUR/tCO2

  std::size_t size() const { return times.size(); }
};

struct CsvSchema {
  std::string timestamp = "timestamp";
  std::string price = "price";
  std::string load_fc = "load_fc";
  std::string wind_on = "wind_onshore_fc";
  std::string wind_off = "wind_offshore_fc";
  std::string solar_fc = "solar_fc";
  std::string coal = "coal";
  std::string gas = "gas";
  std::string oil = "oil";
  std::string eua = "eua";
};

// Parses and validates the hourly CSV, forward-fills the daily fuel/EUA
// columns, repairs DST irregularities and trims partial leading/trailing
// days so every calendar day contributes exactly 24 rows.
HourlyPanel load_csv(const std::string& path, const CsvSchema& schema = {});

// Repairs the two statutory DST events on the civil grid: a missing hour
// (spring forward) is filled by linear interpolation of its neighbours, a
// duplicated hour (fall back) is replaced by the mean of both observations.
// Anything else raises GapError. Idempotent.
HourlyPanel normalize_dst(const HourlyPanel& panel);

void write_panel_csv(const std::string& path, const HourlyPanel& panel);

struct SeriesSummary {
  std::string name;
  double mean, stddev, min, q25, median, q75, max;
};

// Per-series descriptive statistics (sample stddev, linearly interpolated
// quartiles).
std::vector<SeriesSummary> summarize(const HourlyPanel& panel);

}  // namespace epf::data
