#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "epf/dataset.hpp"
#include "epf/matrix.hpp"

namespace epf::data {

struct FeatureConfig {
  // Onshore + offshore wind are combined into one Wind series by default;
  // disabling keeps them as two separate fundamentals.
  bool merge_wind = true;
  // Lags of the daily fuel block relative to the target day, in the order
  // (EUA, NGas, Oil, Coal). Publication timing differs per series and per
  // data vendor, so each lag is configurable.
  std::array<int, 4> fuel_lags = {1, 2, 2, 2};
  // One mean/std pair shared by all 24 target hours instead of per-hour.
  bool scalar_target_standardization = false;

  int fundamentals() const { return merge_wind ? 3 : 4; }
  int max_fuel_lag() const {
    int m = 1;
    for (int l : fuel_lags) m = std::max(m, l);
    return m;
  }
};

// Hourly panel reshaped to one row per calendar day.
struct DailyMatrix {
  CivilDate first_day;
  int days = 0;
  Matrix price;     // T x 24
  Matrix fund;      // T x (24 * D_fund), hour-major: column s*D_fund+f
  Matrix fuels;     // T x 4: (eua, gas, oil, coal) value of that day
  Matrix cal;       // T x 3: Mon/Sat/Sun one-hot of that day
  std::vector<int> weekday;  // 0 = Monday

  CivilDate date(int t) const { return add_days(first_day, t); }
};

DailyMatrix to_daily(const HourlyPanel& panel, const FeatureConfig& cfg);

// Per-target-day samples. Sample i corresponds to target day t = first_target
// + i of the daily matrix; the first `first_target` days are consumed by lag
// construction.
struct FeatureSets {
  FeatureConfig config;
  CivilDate day0_date;  // date of sample 0's target day
  int first_target = 0;
  int count = 0;
  int lin_width = 0;  // per-hour design row width, intercept not included
  int rnn_width = 0;  // D

  // (count*24) x lin_width, row i*24+s = regressors of sample i, hour s:
  // (Y lags 1/2/7, Mon/Sat/Sun, Load/Wind/Solar of hour s, fuel block)
  Matrix lin;
  // count x D, per-day vector (Y_{t-1}, cal_t, Fund_t, fuels)
  Matrix rnn;
  // count x 24 target prices
  Matrix targets;

  CivilDate date(int sample) const { return add_days(day0_date, sample); }

  Matrix rnn_slice(int from, int to) const;     // (to-from) x D
  Matrix lin_slice(int from, int to) const;     // (to-from)*24 x lin_width
  Matrix target_slice(int from, int to) const;  // (to-from) x 24
};

FeatureSets build_features(const DailyMatrix& dm, const FeatureConfig& cfg);

// Train-window standardization statistics. Sigma of constant feature columns
// is clamped to 1 (flagged); a constant target column is an error.
struct StandardizationParams {
  Matrix lin_mu, lin_sigma;  // 1 x lin_width
  Matrix rnn_mu, rnn_sigma;  // 1 x D
  Matrix y_mu, y_sigma;      // 1 x 24
  bool feature_clamped = false;
};

// Statistics over samples [begin, end) only; anything outside the window
// cannot leak in.
StandardizationParams fit_standardizer(const FeatureSets& fs, int begin, int end);

Matrix standardize_rows(const Matrix& rows, const Matrix& mu, const Matrix& sigma);
Matrix destandardize_rows(const Matrix& rows, const Matrix& mu, const Matrix& sigma);

struct SplitRanges {
  int train_begin = 0, train_end = 0, val_end = 0, test_end = 0;
  int train_count() const { return train_end - train_begin; }
  int val_count() const { return val_end - train_end; }
  int test_count() const { return test_end - val_end; }
};

// Splits [0, total) into consecutive train/validation/test ranges that use
// every day exactly once.
SplitRanges split(int total, int train_days, int val_days, int test_days);

// Validated daily-matrix cache written by `prepare` and consumed by the
// training commands. JSON keeps the doubles bit-exact.
void save_daily_cache(const std::string& path, const DailyMatrix& dm, const FeatureConfig& cfg,
                      const std::string& source_hash);
struct DailyCache {
  DailyMatrix dm;
  FeatureConfig config;
  std::string source_hash;
};
DailyCache load_daily_cache(const std::string& path);

}  // namespace epf::data
