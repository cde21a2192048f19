#include "epf/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "epf/error.hpp"

namespace epf::eval {

namespace {

void check_shapes(const Matrix& actual, const Matrix& forecast) {
  if (!actual.same_shape(forecast) || actual.rows() == 0)
    fail(ErrorCode::ShapeMismatch, "metric inputs must be equal-shaped and nonempty");
}

}  // namespace

double rmse(const Matrix& actual, const Matrix& forecast) {
  check_shapes(actual, forecast);
  double s = 0.0;
  for (std::size_t k = 0; k < actual.size(); ++k) {
    const double d = actual.at_flat(k) - forecast.at_flat(k);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(actual.size()));
}

double mae(const Matrix& actual, const Matrix& forecast) {
  check_shapes(actual, forecast);
  double s = 0.0;
  for (std::size_t k = 0; k < actual.size(); ++k)
    s += std::fabs(actual.at_flat(k) - forecast.at_flat(k));
  return s / static_cast<double>(actual.size());
}

std::vector<double> rmse_per_hour(const Matrix& actual, const Matrix& forecast) {
  check_shapes(actual, forecast);
  std::vector<double> out(actual.cols());
  for (std::size_t s = 0; s < actual.cols(); ++s) {
    double acc = 0.0;
    for (std::size_t t = 0; t < actual.rows(); ++t) {
      const double d = actual(t, s) - forecast(t, s);
      acc += d * d;
    }
    out[s] = std::sqrt(acc / static_cast<double>(actual.rows()));
  }
  return out;
}

std::vector<double> mae_per_hour(const Matrix& actual, const Matrix& forecast) {
  check_shapes(actual, forecast);
  std::vector<double> out(actual.cols());
  for (std::size_t s = 0; s < actual.cols(); ++s) {
    double acc = 0.0;
    for (std::size_t t = 0; t < actual.rows(); ++t)
      acc += std::fabs(actual(t, s) - forecast(t, s));
    out[s] = acc / static_cast<double>(actual.rows());
  }
  return out;
}

double weekly_naive(const Matrix& price, int t, int s) {
  if (t < 7) fail(ErrorCode::InsufficientHistory, "weekly naive needs 7 days of history");
  if (static_cast<std::size_t>(t) >= price.rows() || static_cast<std::size_t>(s) >= price.cols())
    fail(ErrorCode::RangeError, "weekly naive index out of range");
  return price(t - 7, s);
}

Matrix weekly_naive_matrix(const Matrix& price, int t_begin, int t_end) {
  if (t_begin < 7) fail(ErrorCode::InsufficientHistory, "weekly naive needs 7 days of history");
  if (t_end > static_cast<int>(price.rows()) || t_begin >= t_end)
    fail(ErrorCode::RangeError, "weekly naive range invalid");
  Matrix out(t_end - t_begin, price.cols());
  for (int t = t_begin; t < t_end; ++t)
    for (std::size_t s = 0; s < price.cols(); ++s) out(t - t_begin, s) = price(t - 7, s);
  return out;
}

double rmae(double model_mae, double naive_mae) {
  if (!(naive_mae > 0.0))
    fail(ErrorCode::DegenerateBaseline, "naive MAE is zero; rMAE undefined");
  return model_mae / naive_mae;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

GwResult gw_test(const Matrix& errors_a, const Matrix& errors_b) {
  check_shapes(errors_a, errors_b);
  const int n = static_cast<int>(errors_a.rows());

  std::vector<double> delta(n);
  for (int d = 0; d < n; ++d) {
    double la = 0.0, lb = 0.0;
    for (std::size_t s = 0; s < errors_a.cols(); ++s) {
      la += std::fabs(errors_a(d, s));
      lb += std::fabs(errors_b(d, s));
    }
    delta[d] = la - lb;
  }

  double mean = 0.0;
  for (double v : delta) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : delta) var += (v - mean) * (v - mean);
  var = n > 1 ? var / (n - 1.0) : 0.0;
  if (var <= 0.0)
    fail(ErrorCode::DegenerateDifferential, "loss differential has zero variance");

  GwResult r;
  r.days = n;
  r.small_sample = n < 30;
  r.statistic = mean / std::sqrt(var / n);
  // A better than B pushes the differential negative; small p-values then
  // mean the first model forecasts significantly better.
  r.p_value = normal_cdf(r.statistic);
  return r;
}

EvalReport evaluate(const std::vector<std::string>& names, const Matrix& actual,
                    const std::vector<Matrix>& forecasts, const Matrix& naive_forecast) {
  if (names.size() != forecasts.size())
    fail(ErrorCode::ShapeMismatch, "one name per forecast required");

  EvalReport rep;
  const double mae_naive = mae(actual, naive_forecast);

  std::vector<Matrix> all = forecasts;
  all.push_back(naive_forecast);
  rep.models = names;
  rep.models.push_back("weekly-naive");

  for (const Matrix& f : all) {
    rep.rmse.push_back(rmse(actual, f));
    rep.mae.push_back(mae(actual, f));
    rep.rmae.push_back(rmae(rep.mae.back(), mae_naive));
    rep.rmse_hour.push_back(rmse_per_hour(actual, f));
    rep.mae_hour.push_back(mae_per_hour(actual, f));
  }

  const std::size_t m = all.size();
  rep.gw_p = Matrix::filled(m, m, 1.0);
  for (std::size_t row = 0; row < m; ++row)
    for (std::size_t col = 0; col < m; ++col) {
      if (row == col) continue;
      Matrix ea = actual, eb = actual;
      ea -= all[col];
      eb -= all[row];
      try {
        const GwResult g = gw_test(ea, eb);  // column model vs row model
        rep.gw_p(row, col) = g.p_value;
        rep.small_sample = rep.small_sample || g.small_sample;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateDifferential) throw;
        rep.gw_p(row, col) = 1.0;  // indistinguishable forecasts
      }
    }
  return rep;
}

namespace {

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ParseError, "cannot write '" + path + "'");
  out << "model,rmse,mae,rmae\n";
  for (std::size_t i = 0; i < report.models.size(); ++i)
    out << report.models[i] << ',' << fmt(report.rmse[i]) << ',' << fmt(report.mae[i]) << ','
        << fmt(report.rmae[i]) << '\n';
}

void write_gw_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ParseError, "cannot write '" + path + "'");
  out << "worse_model";
  for (const auto& m : report.models) out << ',' << m;
  out << '\n';
  for (std::size_t r = 0; r < report.models.size(); ++r) {
    out << report.models[r];
    for (std::size_t c = 0; c < report.models.size(); ++c) {
      out << ',';
      if (r != c) out << fmt(report.gw_p(r, c));
    }
    out << '\n';
  }
}

void write_per_hour_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ParseError, "cannot write '" + path + "'");
  out << "model,hour,rmse,mae\n";
  for (std::size_t i = 0; i < report.models.size(); ++i)
    for (std::size_t s = 0; s < report.rmse_hour[i].size(); ++s)
      out << report.models[i] << ',' << s << ',' << fmt(report.rmse_hour[i][s]) << ','
          << fmt(report.mae_hour[i][s]) << '\n';
}

}  // namespace epf::eval
