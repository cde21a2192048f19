#pragma once

#include <string>
#include <vector>

#include "epf/matrix.hpp"

namespace epf::eval {

// Overall metrics across all days and hours (matrices are T x 24).
double rmse(const Matrix& actual, const Matrix& forecast);
double mae(const Matrix& actual, const Matrix& forecast);
std::vector<double> rmse_per_hour(const Matrix& actual, const Matrix& forecast);
std::vector<double> mae_per_hour(const Matrix& actual, const Matrix& forecast);

// The weekly naive benchmark Y_{t-7,s} over a price history.
double weekly_naive(const Matrix& price, int t, int s);
// Naive forecasts for days [t_begin, t_end) as a (t_end-t_begin) x 24 block.
Matrix weekly_naive_matrix(const Matrix& price, int t_begin, int t_end);

// MAE relative to the naive benchmark's MAE.
double rmae(double model_mae, double naive_mae);

struct GwResult {
  double statistic = 0.0;  // t statistic of the daily loss differential
  double p_value = 1.0;    // one-sided; small means A forecasts better
  int days = 0;
  bool small_sample = false;  // fewer than 30 days
};

// Unconditional multivariate Giacomini-White comparison on the daily L1
// loss differential sum_h |e_A| - sum_h |e_B|. Errors are actual - forecast,
// T x 24.
GwResult gw_test(const Matrix& errors_a, const Matrix& errors_b);

double normal_cdf(double x);

struct EvalReport {
  std::vector<std::string> models;
  std::vector<double> rmse, mae, rmae;
  std::vector<std::vector<double>> rmse_hour, mae_hour;
  Matrix gw_p;  // gw_p(row, col) = p-value that column model beats row model
  bool small_sample = false;
};

// Metric table plus pairwise GW matrix. `forecasts` holds one T x 24 matrix
// per model name; the naive forecast is appended as its own row.
EvalReport evaluate(const std::vector<std::string>& names, const Matrix& actual,
                    const std::vector<Matrix>& forecasts, const Matrix& naive_forecast);

void write_metrics_csv(const std::string& path, const EvalReport& report);
void write_gw_csv(const std::string& path, const EvalReport& report);
void write_per_hour_csv(const std::string& path, const EvalReport& report);

}  // namespace epf::eval
