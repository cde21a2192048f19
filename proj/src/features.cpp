#include "epf/features.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "epf/error.hpp"

namespace epf::data {

DailyMatrix to_daily(const HourlyPanel& panel, const FeatureConfig& cfg) {
  if (panel.size() % 24 != 0)
    fail(ErrorCode::GapError, "panel length is not a whole number of days");
  const int days = static_cast<int>(panel.size() / 24);
  if (days == 0) fail(ErrorCode::InsufficientHistory, "empty panel");
  for (std::size_t i = 0; i < panel.size(); ++i)
    if (panel.times[i].hour != static_cast<int>(i % 24))
      fail(ErrorCode::GapError, "panel hours not aligned to 0..23");

  const int nf = cfg.fundamentals();
  DailyMatrix dm;
  dm.first_day = panel.times[0].date;
  dm.days = days;
  dm.price = Matrix(days, 24);
  dm.fund = Matrix(days, 24 * nf);
  dm.fuels = Matrix(days, 4);
  dm.cal = Matrix(days, 3);
  dm.weekday.resize(days);

  const std::int64_t day0 = days_from_civil(dm.first_day);
  for (int t = 0; t < days; ++t) {
    for (int s = 0; s < 24; ++s) {
      const std::size_t k = static_cast<std::size_t>(t) * 24 + s;
      dm.price(t, s) = panel.price[k];
      if (cfg.merge_wind) {
        dm.fund(t, s * nf + 0) = panel.load_fc[k];
        dm.fund(t, s * nf + 1) = panel.wind_on[k] + panel.wind_off[k];
        dm.fund(t, s * nf + 2) = panel.solar_fc[k];
      } else {
        dm.fund(t, s * nf + 0) = panel.load_fc[k];
        dm.fund(t, s * nf + 1) = panel.wind_on[k];
        dm.fund(t, s * nf + 2) = panel.wind_off[k];
        dm.fund(t, s * nf + 3) = panel.solar_fc[k];
      }
    }
    const std::size_t k0 = static_cast<std::size_t>(t) * 24;
    dm.fuels(t, 0) = panel.eua[k0];
    dm.fuels(t, 1) = panel.gas[k0];
    dm.fuels(t, 2) = panel.oil[k0];
    dm.fuels(t, 3) = panel.coal[k0];
    const int wd = weekday_from_days(day0 + t);
    dm.weekday[t] = wd;
    dm.cal(t, 0) = wd == 0 ? 1.0 : 0.0;  // Monday
    dm.cal(t, 1) = wd == 5 ? 1.0 : 0.0;  // Saturday
    dm.cal(t, 2) = wd == 6 ? 1.0 : 0.0;  // Sunday
  }
  return dm;
}

FeatureSets build_features(const DailyMatrix& dm, const FeatureConfig& cfg) {
  constexpr int kLongestLag = 7;
  for (int l : cfg.fuel_lags)
    if (l < 1 || l > kLongestLag)
      fail(ErrorCode::RangeError, "fuel lags must be in [1, 7]");
  if (dm.days <= kLongestLag)
    fail(ErrorCode::InsufficientHistory,
         "need more than " + std::to_string(kLongestLag) + " days, have " +
             std::to_string(dm.days));
  const int nf = cfg.fundamentals();
  FeatureSets fs;
  fs.config = cfg;
  fs.first_target = kLongestLag;
  fs.day0_date = dm.date(fs.first_target);
  fs.count = dm.days - kLongestLag;
  fs.lin_width = 3 + 3 + nf + 4;
  fs.rnn_width = 24 + 3 + 24 * nf + 4;
  fs.lin = Matrix(static_cast<std::size_t>(fs.count) * 24, fs.lin_width);
  fs.rnn = Matrix(fs.count, fs.rnn_width);
  fs.targets = Matrix(fs.count, 24);

  for (int i = 0; i < fs.count; ++i) {
    const int t = fs.first_target + i;
    for (int s = 0; s < 24; ++s) {
      double* r = fs.lin.data() + (static_cast<std::size_t>(i) * 24 + s) * fs.lin_width;
      int c = 0;
      r[c++] = dm.price(t - 1, s);
      r[c++] = dm.price(t - 2, s);
      r[c++] = dm.price(t - 7, s);
      for (int j = 0; j < 3; ++j) r[c++] = dm.cal(t, j);
      for (int f = 0; f < nf; ++f) r[c++] = dm.fund(t, s * nf + f);
      for (int f = 0; f < 4; ++f) r[c++] = dm.fuels(t - cfg.fuel_lags[f], f);
      fs.targets(i, s) = dm.price(t, s);
    }
    double* v = fs.rnn.data() + static_cast<std::size_t>(i) * fs.rnn_width;
    int c = 0;
    for (int s = 0; s < 24; ++s) v[c++] = dm.price(t - 1, s);
    for (int j = 0; j < 3; ++j) v[c++] = dm.cal(t, j);
    for (int s = 0; s < 24; ++s)
      for (int f = 0; f < nf; ++f) v[c++] = dm.fund(t, s * nf + f);
    for (int f = 0; f < 4; ++f) v[c++] = dm.fuels(t - cfg.fuel_lags[f], f);
  }
  return fs;
}

namespace {

// Column means and sample standard deviations (N-1). Constant columns get
// sigma = 0 here; the caller decides whether that is clamped or fatal.
void column_stats(const Matrix& rows, std::size_t r_begin, std::size_t r_end, Matrix& mu,
                  Matrix& sigma) {
  const std::size_t p = rows.cols();
  const double n = static_cast<double>(r_end - r_begin);
  mu = Matrix(1, p);
  sigma = Matrix(1, p);
  for (std::size_t j = 0; j < p; ++j) {
    double m = 0.0;
    for (std::size_t i = r_begin; i < r_end; ++i) m += rows(i, j);
    m /= n;
    double v = 0.0;
    for (std::size_t i = r_begin; i < r_end; ++i) {
      const double d = rows(i, j) - m;
      v += d * d;
    }
    mu(0, j) = m;
    sigma(0, j) = n > 1 ? std::sqrt(v / (n - 1.0)) : 0.0;
  }
}

}  // namespace

Matrix FeatureSets::rnn_slice(int from, int to) const {
  Matrix out(to - from, rnn_width);
  for (int i = from; i < to; ++i)
    for (int j = 0; j < rnn_width; ++j) out(i - from, j) = rnn(i, j);
  return out;
}

Matrix FeatureSets::lin_slice(int from, int to) const {
  Matrix out(static_cast<std::size_t>(to - from) * 24, lin_width);
  const std::size_t base = static_cast<std::size_t>(from) * 24;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (int j = 0; j < lin_width; ++j) out(r, j) = lin(base + r, j);
  return out;
}

Matrix FeatureSets::target_slice(int from, int to) const {
  Matrix out(to - from, 24);
  for (int i = from; i < to; ++i)
    for (int j = 0; j < 24; ++j) out(i - from, j) = targets(i, j);
  return out;
}

StandardizationParams fit_standardizer(const FeatureSets& fs, int begin, int end) {
  if (begin < 0 || end > fs.count || end - begin < 2)
    fail(ErrorCode::RangeError, "standardizer window needs at least 2 samples");

  StandardizationParams p;
  column_stats(fs.lin, static_cast<std::size_t>(begin) * 24, static_cast<std::size_t>(end) * 24,
               p.lin_mu, p.lin_sigma);
  column_stats(fs.rnn, begin, end, p.rnn_mu, p.rnn_sigma);
  column_stats(fs.targets, begin, end, p.y_mu, p.y_sigma);

  for (Matrix* s : {&p.lin_sigma, &p.rnn_sigma})
    for (std::size_t j = 0; j < s->cols(); ++j)
      if ((*s)(0, j) == 0.0) {
        (*s)(0, j) = 1.0;
        p.feature_clamped = true;
      }

  for (std::size_t j = 0; j < 24; ++j)
    if (p.y_sigma(0, j) == 0.0)
      fail(ErrorCode::DegenerateColumn,
           "target hour " + std::to_string(j) + " is constant in the window");

  if (fs.config.scalar_target_standardization) {
    double m = 0.0;
    for (std::size_t j = 0; j < 24; ++j) m += p.y_mu(0, j);
    m /= 24.0;
    // pooled variance over all hours in the window
    double v = 0.0;
    const double n = static_cast<double>(end - begin) * 24.0;
    for (int i = begin; i < end; ++i)
      for (std::size_t j = 0; j < 24; ++j) {
        const double d = fs.targets(i, j) - m;
        v += d * d;
      }
    const double sd = std::sqrt(v / (n - 1.0));
    if (sd == 0.0) fail(ErrorCode::DegenerateColumn, "target is constant in the window");
    for (std::size_t j = 0; j < 24; ++j) {
      p.y_mu(0, j) = m;
      p.y_sigma(0, j) = sd;
    }
  }
  return p;
}

Matrix standardize_rows(const Matrix& rows, const Matrix& mu, const Matrix& sigma) {
  if (rows.cols() != mu.cols() || rows.cols() != sigma.cols())
    fail(ErrorCode::ShapeMismatch, "standardize_rows width mismatch");
  Matrix out = rows;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j)
      out(i, j) = (out(i, j) - mu(0, j)) / sigma(0, j);
  return out;
}

Matrix destandardize_rows(const Matrix& rows, const Matrix& mu, const Matrix& sigma) {
  if (rows.cols() != mu.cols() || rows.cols() != sigma.cols())
    fail(ErrorCode::ShapeMismatch, "destandardize_rows width mismatch");
  Matrix out = rows;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = out(i, j) * sigma(0, j) + mu(0, j);
  return out;
}

SplitRanges split(int total, int train_days, int val_days, int test_days) {
  if (train_days < 0 || val_days < 0 || test_days < 0)
    fail(ErrorCode::RangeError, "split counts must be nonnegative");
  if (train_days + val_days + test_days != total)
    fail(ErrorCode::RangeError, "split " + std::to_string(train_days) + "+" +
                                    std::to_string(val_days) + "+" + std::to_string(test_days) +
                                    " does not cover " + std::to_string(total) + " days");
  SplitRanges r;
  r.train_begin = 0;
  r.train_end = train_days;
  r.val_end = train_days + val_days;
  r.test_end = total;
  return r;
}

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

}  // namespace

void save_daily_cache(const std::string& path, const DailyMatrix& dm, const FeatureConfig& cfg,
                      const std::string& source_hash) {
  json j;
  j["format"] = "epf-cache";
  j["version"] = 1;
  j["source_hash"] = source_hash;
  j["config"] = {{"merge_wind", cfg.merge_wind},
                 {"fuel_lags", cfg.fuel_lags},
                 {"scalar_target_standardization", cfg.scalar_target_standardization}};
  j["first_day"] = to_string(dm.first_day);
  j["days"] = dm.days;
  j["price"] = matrix_to_json(dm.price);
  j["fund"] = matrix_to_json(dm.fund);
  j["fuels"] = matrix_to_json(dm.fuels);
  j["cal"] = matrix_to_json(dm.cal);
  j["weekday"] = dm.weekday;
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ParseError, "cannot write '" + path + "'");
  out << j.dump() << '\n';
}

DailyCache load_daily_cache(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(ErrorCode::ParseError, std::string("bad cache file: ") + e.what());
  }
  if (j.value("format", "") != "epf-cache" || j.value("version", 0) != 1)
    fail(ErrorCode::ParseError, "not an epf cache: " + path);
  DailyCache c;
  c.source_hash = j.at("source_hash").get<std::string>();
  const json& cf = j.at("config");
  c.config.merge_wind = cf.at("merge_wind").get<bool>();
  c.config.fuel_lags = cf.at("fuel_lags").get<std::array<int, 4>>();
  c.config.scalar_target_standardization = cf.at("scalar_target_standardization").get<bool>();
  c.dm.first_day = parse_date(j.at("first_day").get<std::string>());
  c.dm.days = j.at("days").get<int>();
  c.dm.price = matrix_from_json(j.at("price"));
  c.dm.fund = matrix_from_json(j.at("fund"));
  c.dm.fuels = matrix_from_json(j.at("fuels"));
  c.dm.cal = matrix_from_json(j.at("cal"));
  c.dm.weekday = j.at("weekday").get<std::vector<int>>();
  return c;
}

}  // namespace epf::data
