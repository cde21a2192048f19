#include "epf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "epf/error.hpp"

namespace epf::data {

std::int64_t days_from_civil(const CivilDate& d) {
  int y = d.year;
  const int m = d.month;
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d.day - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned day = doy - (153 * mp + 2) / 5 + 1;
  const unsigned month = mp + (mp < 10 ? 3 : -9);
  return CivilDate{static_cast<int>(y + (month <= 2)), static_cast<int>(month),
                   static_cast<int>(day)};
}

int weekday_from_days(std::int64_t z) {
  // 1970-01-01 was a Thursday; map to 0 = Monday.
  return static_cast<int>(((z % 7) + 10) % 7);
}

CivilDate add_days(const CivilDate& d, int n) { return civil_from_days(days_from_civil(d) + n); }

std::string to_string(const CivilDate& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

CivilDate parse_date(const std::string& s) {
  CivilDate d;
  if (std::sscanf(s.c_str(), "%d-%d-%d", &d.year, &d.month, &d.day) != 3 || d.month < 1 ||
      d.month > 12 || d.day < 1 || d.day > 31)
    fail(ErrorCode::ParseError, "bad date '" + s + "'");
  return d;
}

namespace {

// Reads exactly `digits` decimal digits starting at pos; advances pos.
int read_digits(const std::string& s, std::size_t& pos, int digits) {
  if (pos + digits > s.size()) fail(ErrorCode::ParseError, "truncated timestamp '" + s + "'");
  int v = 0;
  for (int i = 0; i < digits; ++i) {
    const char c = s[pos + i];
    if (c < '0' || c > '9') fail(ErrorCode::ParseError, "bad timestamp '" + s + "'");
    v = v * 10 + (c - '0');
  }
  pos += digits;
  return v;
}

void expect_char(const std::string& s, std::size_t& pos, char c) {
  if (pos >= s.size() || s[pos] != c) fail(ErrorCode::ParseError, "bad timestamp '" + s + "'");
  ++pos;
}

}  // namespace

Timestamp parse_timestamp(const std::string& s) {
  Timestamp t;
  std::size_t pos = 0;
  t.date.year = read_digits(s, pos, 4);
  expect_char(s, pos, '-');
  t.date.month = read_digits(s, pos, 2);
  expect_char(s, pos, '-');
  t.date.day = read_digits(s, pos, 2);
  if (pos >= s.size() || (s[pos] != 'T' && s[pos] != ' '))
    fail(ErrorCode::ParseError, "bad timestamp '" + s + "'");
  ++pos;
  t.hour = read_digits(s, pos, 2);
  expect_char(s, pos, ':');
  t.minute = read_digits(s, pos, 2);
  if (pos < s.size() && s[pos] == ':') {
    ++pos;
    read_digits(s, pos, 2);  // seconds, always :00 on an hourly grid
  }
  if (t.date.month < 1 || t.date.month > 12 || t.date.day < 1 || t.date.day > 31 || t.hour < 0 ||
      t.hour > 23 || t.minute < 0 || t.minute > 59)
    fail(ErrorCode::ParseError, "timestamp out of range '" + s + "'");

  if (pos == s.size()) {
    t.offset_min = 0;
  } else if (s[pos] == 'Z' || s[pos] == 'z') {
    if (pos + 1 != s.size()) fail(ErrorCode::ParseError, "bad timestamp '" + s + "'");
    t.offset_min = 0;
  } else if (s[pos] == '+' || s[pos] == '-') {
    const int sign = s[pos] == '-' ? -1 : 1;
    ++pos;
    const int oh = read_digits(s, pos, 2);
    expect_char(s, pos, ':');
    const int om = read_digits(s, pos, 2);
    if (pos != s.size()) fail(ErrorCode::ParseError, "bad timestamp '" + s + "'");
    t.offset_min = sign * (oh * 60 + om);
  } else {
    fail(ErrorCode::ParseError, "bad timezone offset '" + s + "'");
  }
  return t;
}

std::string format_timestamp(const Timestamp& t) {
  char buf[40];
  const int off = t.offset_min;
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:00%c%02d:%02d", t.date.year,
                t.date.month, t.date.day, t.hour, t.minute, off < 0 ? '-' : '+',
                std::abs(off) / 60, std::abs(off) % 60);
  return buf;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_value(const std::string& field, std::size_t row, const std::string& col) {
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end == field.c_str() || *end != '\0' || !std::isfinite(v)) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "row %zu, column '%s': bad value '%s'", row, col.c_str(),
                  field.c_str());
    fail(ErrorCode::ParseError, buf);
  }
  return v;
}

std::vector<double>& series_by_tag(HourlyPanel& p, int tag) {
  switch (tag) {
    case 0: return p.price;
    case 1: return p.load_fc;
    case 2: return p.wind_on;
    case 3: return p.wind_off;
    case 4: return p.solar_fc;
    case 5: return p.coal;
    case 6: return p.gas;
    case 7: return p.oil;
    default: return p.eua;
  }
}

const std::vector<double>& series_by_tag(const HourlyPanel& p, int tag) {
  return series_by_tag(const_cast<HourlyPanel&>(p), tag);
}

constexpr int kSeriesCount = 9;

}  // namespace

HourlyPanel load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::ParseError, "empty file '" + path + "'");
  const auto header = split_line(line);

  auto find_col = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    fail(ErrorCode::ParseError, "missing column '" + name + "' in '" + path + "'");
  };

  const std::size_t ts_col = find_col(schema.timestamp);
  HourlyPanel panel;
  struct Spec {
    std::string name;
    std::size_t col;
    int tag;
    bool fill;
  };
  const std::vector<Spec> cols = {
      {schema.price, find_col(schema.price), 0, false},
      {schema.load_fc, find_col(schema.load_fc), 1, false},
      {schema.wind_on, find_col(schema.wind_on), 2, false},
      {schema.wind_off, find_col(schema.wind_off), 3, false},
      {schema.solar_fc, find_col(schema.solar_fc), 4, false},
      {schema.coal, find_col(schema.coal), 5, true},
      {schema.gas, find_col(schema.gas), 6, true},
      {schema.oil, find_col(schema.oil), 7, true},
      {schema.eua, find_col(schema.eua), 8, true},
  };

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size()) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "row %zu: expected %zu fields, got %zu", row, header.size(),
                    fields.size());
      fail(ErrorCode::ParseError, buf);
    }
    panel.times.push_back(parse_timestamp(fields[ts_col]));
    for (const auto& c : cols) {
      auto& dst = series_by_tag(panel, c.tag);
      const std::string& f = fields[c.col];
      if (f.empty()) {
        if (!c.fill || dst.empty()) {
          char buf[128];
          std::snprintf(buf, sizeof(buf), "row %zu, column '%s': missing value", row,
                        c.name.c_str());
          fail(ErrorCode::ParseError, buf);
        }
        dst.push_back(dst.back());  // forward fill daily series
      } else {
        dst.push_back(parse_value(f, row, c.name));
      }
    }
  }
  if (panel.times.empty()) fail(ErrorCode::ParseError, "no data rows in '" + path + "'");

  for (std::size_t i = 1; i < panel.times.size(); ++i)
    if (panel.times[i].civil_hour_index() < panel.times[i - 1].civil_hour_index())
      fail(ErrorCode::ParseError, "timestamps not increasing near row " + std::to_string(i + 2));

  HourlyPanel fixed = normalize_dst(panel);

  // Trim partial first/last days so days are complete.
  std::size_t begin = 0;
  while (begin < fixed.size() && fixed.times[begin].hour != 0) ++begin;
  std::size_t end = fixed.size();
  while (end > begin && fixed.times[end - 1].hour != 23) --end;
  if (end - begin < 24) fail(ErrorCode::ParseError, "less than one complete day in '" + path + "'");
  if (begin != 0 || end != fixed.size()) {
    HourlyPanel trimmed;
    trimmed.times.assign(fixed.times.begin() + begin, fixed.times.begin() + end);
    for (int tag = 0; tag < kSeriesCount; ++tag) {
      const auto& src = series_by_tag(fixed, tag);
      series_by_tag(trimmed, tag).assign(src.begin() + begin, src.begin() + end);
    }
    return trimmed;
  }
  return fixed;
}

HourlyPanel normalize_dst(const HourlyPanel& panel) {
  if (panel.times.empty()) return panel;
  HourlyPanel out;
  auto push_row = [&](const Timestamp& ts, int src) {
    out.times.push_back(ts);
    for (int tag = 0; tag < kSeriesCount; ++tag)
      series_by_tag(out, tag).push_back(series_by_tag(panel, tag)[src]);
  };

  push_row(panel.times[0], 0);
  int dup_run = 0;
  for (std::size_t i = 1; i < panel.size(); ++i) {
    const std::int64_t prev = out.times.back().civil_hour_index();
    const std::int64_t cur = panel.times[i].civil_hour_index();
    const std::int64_t delta = cur - prev;
    if (delta != 0) dup_run = 0;
    if (delta == 1) {
      push_row(panel.times[i], static_cast<int>(i));
    } else if (delta == 0) {
      // fall back: same wall-clock hour twice, keep the mean of both rows
      if (++dup_run > 1)
        fail(ErrorCode::GapError,
             "hour repeated more than twice at " + format_timestamp(panel.times[i]));
      const std::size_t last = out.size() - 1;
      for (int tag = 0; tag < kSeriesCount; ++tag) {
        auto& dst = series_by_tag(out, tag);
        dst[last] = 0.5 * (dst[last] + series_by_tag(panel, tag)[i]);
      }
    } else if (delta == 2) {
      // spring forward: one missing wall-clock hour, interpolate neighbours
      Timestamp mid = panel.times[i];
      const std::int64_t h = prev + 1;
      const std::int64_t day = h >= 0 ? h / 24 : (h - 23) / 24;  // floor
      mid.date = civil_from_days(day);
      mid.hour = static_cast<int>(h - day * 24);
      mid.offset_min = out.times.back().offset_min;
      out.times.push_back(mid);
      for (int tag = 0; tag < kSeriesCount; ++tag) {
        auto& dst = series_by_tag(out, tag);
        dst.push_back(0.5 * (dst.back() + series_by_tag(panel, tag)[i]));
      }
      push_row(panel.times[i], static_cast<int>(i));
    } else {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "gap of %lld hours at %s", static_cast<long long>(delta),
                    format_timestamp(panel.times[i]).c_str());
      fail(ErrorCode::GapError, buf);
    }
  }
  return out;
}

void write_panel_csv(const std::string& path, const HourlyPanel& panel) {
  std::ofstream outf(path);
  if (!outf) fail(ErrorCode::ParseError, "cannot write '" + path + "'");
  outf << "timestamp,price,load_fc,wind_onshore_fc,wind_offshore_fc,solar_fc,coal,gas,oil,eua\n";
  char buf[400];
  for (std::size_t i = 0; i < panel.size(); ++i) {
    std::snprintf(buf, sizeof(buf),
                  "%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                  format_timestamp(panel.times[i]).c_str(), panel.price[i], panel.load_fc[i],
                  panel.wind_on[i], panel.wind_off[i], panel.solar_fc[i], panel.coal[i],
                  panel.gas[i], panel.oil[i], panel.eua[i]);
    outf << buf;
  }
}

namespace {

double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return 0.0;
  const double idx = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const double frac = idx - static_cast<double>(lo);
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

SeriesSummary summarize_one(const std::string& name, const std::vector<double>& x) {
  SeriesSummary s;
  s.name = name;
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var = x.size() > 1 ? var / (n - 1.0) : 0.0;
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  s.mean = mean;
  s.stddev = std::sqrt(var);
  s.min = sorted.front();
  s.q25 = quantile_sorted(sorted, 0.25);
  s.median = quantile_sorted(sorted, 0.5);
  s.q75 = quantile_sorted(sorted, 0.75);
  s.max = sorted.back();
  return s;
}

}  // namespace

std::vector<SeriesSummary> summarize(const HourlyPanel& panel) {
  return {
      summarize_one("price", panel.price),       summarize_one("load_fc", panel.load_fc),
      summarize_one("wind_onshore_fc", panel.wind_on),
      summarize_one("wind_offshore_fc", panel.wind_off),
      summarize_one("solar_fc", panel.solar_fc), summarize_one("coal", panel.coal),
      summarize_one("gas", panel.gas),           summarize_one("oil", panel.oil),
      summarize_one("eua", panel.eua),
  };
}

}  // namespace epf::data
