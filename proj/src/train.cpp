#include "epf/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "epf/error.hpp"
#include "epf/ols.hpp"

namespace epf::train {

void TrainConfig::validate() const {
  for (const PhaseConfig* p : {&init, &update}) {
    if (p->lr <= 0.0 || p->weight_decay < 0.0 || p->l1 < 0.0 || p->epochs < 0)
      fail(ErrorCode::RangeError, "invalid phase configuration");
  }
  if (batch_size < 1) fail(ErrorCode::RangeError, "batch size must be positive");
  if (clip_norm <= 0.0) fail(ErrorCode::RangeError, "clip norm must be positive");
}

double loss(const Matrix& predictions, const Matrix& targets, const model::ModelSpec& spec,
            const model::ModelState& state, double lambda1) {
  if (!predictions.same_shape(targets)) fail(ErrorCode::ShapeMismatch, "loss shape mismatch");
  double mse = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double d = predictions.at_flat(k) - targets.at_flat(k);
    mse += d * d;
  }
  mse /= static_cast<double>(predictions.size());

  double l1 = 0.0;
  model::for_each_param(spec, const_cast<model::ModelState&>(state),
                        [&](model::Param p, Matrix& m) {
                          if (!model::is_output_side(p)) return;
                          const std::size_t skip = p == model::Param::lem ? 1 : 0;
                          for (std::size_t i = 0; i < m.rows(); ++i)
                            for (std::size_t j = skip; j < m.cols(); ++j)
                              l1 += std::fabs(m(i, j));
                        });
  return mse + lambda1 * l1;
}

double clip_gradients(std::map<int, Matrix>& grads, double clip_norm) {
  double sq = 0.0;
  for (const auto& [id, g] : grads) {
    if (!g.all_finite())
      fail(ErrorCode::NonFiniteGradient, std::string("gradient of parameter ") +
                                             model::param_name(static_cast<model::Param>(id)));
    sq += sum_squares(g);
  }
  const double norm = std::sqrt(sq);
  if (norm > clip_norm && norm > 0.0) {
    const double s = clip_norm / norm;
    for (auto& [id, g] : grads) g *= s;
  }
  return norm;
}

void adam_step(const model::ModelSpec& spec, model::ModelState& state, OptimizerState& opt,
               std::map<int, Matrix> grads, double lr, double weight_decay, double clip_norm,
               const AdamConfig& adam) {
  clip_gradients(grads, clip_norm);
  opt.step += 1;
  const double t = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(adam.beta1, t);
  const double bc2 = 1.0 - std::pow(adam.beta2, t);

  model::for_each_param(spec, state, [&](model::Param p, Matrix& theta) {
    if (spec.freeze_lem && p == model::Param::lem) return;
    const int id = model::param_id(p);
    const auto it = grads.find(id);
    if (it == grads.end()) return;
    const Matrix& g = it->second;
    auto& m = opt.m.try_emplace(id, g.rows(), g.cols()).first->second;
    auto& v = opt.v.try_emplace(id, g.rows(), g.cols()).first->second;

    if (weight_decay > 0.0) theta *= 1.0 - lr * weight_decay;  // decoupled decay
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double gk = g.at_flat(k);
      double& mk = m.at_flat(k);
      double& vk = v.at_flat(k);
      mk = adam.beta1 * mk + (1.0 - adam.beta1) * gk;
      vk = adam.beta2 * vk + (1.0 - adam.beta2) * gk * gk;
      const double mh = adam.raw_adam ? mk : mk / bc1;
      const double vh = adam.raw_adam ? vk : vk / bc2;
      theta.at_flat(k) -= lr * mh / (std::sqrt(vh) + adam.eps);
    }
  });
}

double PlateauScheduler::observe(double loss) {
  if (!seen_) {
    seen_ = true;
    best_ = loss;
    return lr_;
  }
  if (loss < best_ * (1.0 - cfg_.rel_threshold)) {
    best_ = loss;
    bad_ = 0;
  } else if (++bad_ >= cfg_.patience) {
    lr_ = std::max(lr_ * cfg_.factor, cfg_.lr_floor);
    bad_ = 0;
  }
  return lr_;
}

double scheduler_step(double initial_lr, const std::vector<double>& loss_history,
                      const SchedulerConfig& cfg) {
  if (loss_history.empty()) fail(ErrorCode::RangeError, "scheduler needs a nonempty history");
  PlateauScheduler sched(initial_lr, cfg);
  double lr = initial_lr;
  for (double l : loss_history) lr = sched.observe(l);
  return lr;
}

TapeValue training_loss_tape(Tape& tape, const model::ModelSpec& spec,
                             const model::TapeParams& params, const model::BatchInputs& in,
                             const Matrix& targets, double lambda1) {
  TapeValue pred = model::forward_tape(tape, spec, params, in);
  TapeValue total =
      tape.scale(tape.sum_sq_diff(pred, targets), 1.0 / static_cast<double>(targets.size()));
  if (lambda1 > 0.0) {
    if (has_rnn(spec.arch))
      total = tape.add(total, tape.scale(tape.l1_norm(params.w_out), lambda1));
    if (has_kf(spec.arch))
      total = tape.add(total, tape.scale(tape.l1_norm(params.a_out), lambda1));
    if (has_lem(spec.arch))
      total = tape.add(total, tape.scale(tape.l1_norm(params.lem, 1), lambda1));
  }
  return total;
}

namespace {

// Standardized view of a training window plus enough leading context rows
// for the recurrent sequences.
struct WindowTensors {
  int begin, end, ctx_begin;
  Matrix rnn;  // (end-ctx_begin) x D
  Matrix lin;  // (end-begin)*24 x p
  Matrix y;    // (end-begin) x 24
};

WindowTensors make_window(const data::FeatureSets& fs, const data::StandardizationParams& sp,
                          int begin, int end, int seq_len, bool need_rnn, bool need_lin) {
  WindowTensors w;
  w.begin = begin;
  w.end = end;
  w.ctx_begin = begin - (seq_len - 1);
  if (need_rnn)
    w.rnn = data::standardize_rows(fs.rnn_slice(w.ctx_begin, end), sp.rnn_mu, sp.rnn_sigma);
  if (need_lin) w.lin = data::standardize_rows(fs.lin_slice(begin, end), sp.lin_mu, sp.lin_sigma);
  w.y = data::standardize_rows(fs.target_slice(begin, end), sp.y_mu, sp.y_sigma);
  return w;
}

// Gathers one minibatch (columns = samples) from the window tensors.
void gather_batch(const WindowTensors& w, const data::FeatureSets& fs,
                  const model::ModelSpec& spec, const std::vector<int>& samples,
                  model::BatchInputs& in, Matrix& targets) {
  const std::size_t n = samples.size();
  const bool recurrent = has_rnn(spec.arch) || has_kf(spec.arch);
  if (recurrent) {
    in.seq.assign(spec.seq_len, Matrix(fs.rnn_width, n));
    for (std::size_t i = 0; i < n; ++i) {
      const int base = samples[i] - (spec.seq_len - 1) - w.ctx_begin;
      for (int u = 0; u < spec.seq_len; ++u)
        for (int j = 0; j < fs.rnn_width; ++j) in.seq[u](j, i) = w.rnn(base + u, j);
    }
  } else {
    in.seq.clear();
  }
  if (has_lem(spec.arch)) {
    in.lem_design = Matrix(n * 24, fs.lin_width);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t src = static_cast<std::size_t>(samples[i] - w.begin) * 24;
      for (std::size_t r = 0; r < 24; ++r)
        for (int j = 0; j < fs.lin_width; ++j)
          in.lem_design(i * 24 + r, j) = w.lin(src + r, j);
    }
  } else {
    in.lem_design = Matrix();
  }
  targets = Matrix(24, n);
  for (std::size_t i = 0; i < n; ++i)
    for (int s = 0; s < 24; ++s) targets(s, i) = w.y(samples[i] - w.begin, s);
}

Matrix draw_dropout_mask(Rng& rng, std::size_t hidden, std::size_t n, double p) {
  Matrix mask(hidden, n);
  const double keep = 1.0 / (1.0 - p);
  for (std::size_t k = 0; k < mask.size(); ++k)
    mask.at_flat(k) = rng.uniform() < p ? 0.0 : keep;
  return mask;
}

}  // namespace

WindowResult train_window(const data::FeatureSets& fs, const data::StandardizationParams& sp,
                          int begin, int end, const model::ModelSpec& spec,
                          const PhaseConfig& phase, const TrainConfig& cfg,
                          model::ModelState state, Rng& rng) {
  spec.validate();
  cfg.validate();
  const int n = end - begin;
  if (n < spec.seq_len + 1)
    fail(ErrorCode::InsufficientHistory,
         "window of " + std::to_string(n) + " days with L=" + std::to_string(spec.seq_len));
  if (begin - (spec.seq_len - 1) < 0 || end > fs.count)
    fail(ErrorCode::InsufficientHistory, "window reaches outside the available samples");

  const bool recurrent = has_rnn(spec.arch) || has_kf(spec.arch);
  const WindowTensors w = make_window(fs, sp, begin, end, spec.seq_len, recurrent,
                                      has_lem(spec.arch));

  WindowResult res;
  res.state = std::move(state);
  if (phase.epochs == 0) return res;

  OptimizerState opt;
  PlateauScheduler sched(phase.lr, cfg.scheduler);
  double lr = phase.lr;

  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = begin + i;

  for (int epoch = 0; epoch < phase.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (int off = 0; off < n; off += cfg.batch_size) {
      const int bn = std::min(cfg.batch_size, n - off);
      const std::vector<int> samples(order.begin() + off, order.begin() + off + bn);

      model::BatchInputs in;
      Matrix targets;
      gather_batch(w, fs, spec, samples, in, targets);
      if (spec.dropout > 0.0) {
        if (has_rnn(spec.arch)) in.rnn_mask = draw_dropout_mask(rng, spec.hidden, bn, spec.dropout);
        if (has_kf(spec.arch)) in.kf_mask = draw_dropout_mask(rng, spec.hidden, bn, spec.dropout);
      }

      Tape tape;
      const model::TapeParams params = model::register_params(tape, spec, res.state);
      const TapeValue total = training_loss_tape(tape, spec, params, in, targets, phase.l1);
      epoch_loss += tape.value(total)(0, 0) * bn;
      auto grads = grad_backward(tape, total);
      adam_step(spec, res.state, opt, std::move(grads), lr, phase.weight_decay, cfg.clip_norm,
                cfg.adam);
    }
    epoch_loss /= static_cast<double>(n);
    res.loss_trace.push_back(epoch_loss);
    lr = sched.observe(epoch_loss);
  }
  return res;
}

void RollingPlan::validate(int available_samples) const {
  if (d_init < 2 || d_all < 2) fail(ErrorCode::RangeError, "window sizes must be at least 2 days");
  if (forecast_begin >= forecast_end) fail(ErrorCode::RangeError, "empty forecast range");
  if (forecast_end > available_samples)
    fail(ErrorCode::RangeError, "forecast range exceeds the available samples");
  if (forecast_begin - d_init < 0)
    fail(ErrorCode::InsufficientHistory, "initial window does not fit before the forecast start");
}

Matrix ols_warm_start(const data::FeatureSets& fs, const data::StandardizationParams& sp,
                      int begin, int end) {
  const int n = end - begin;
  const int p = fs.lin_width;
  const Matrix lin = data::standardize_rows(fs.lin_slice(begin, end), sp.lin_mu, sp.lin_sigma);
  const Matrix y = data::standardize_rows(fs.target_slice(begin, end), sp.y_mu, sp.y_sigma);

  Matrix coef(24, p + 1);
  Matrix ys(n, 1);
  for (int s = 0; s < 24; ++s) {
    // Columns that are constant at this hour (night solar, say) duplicate
    // the intercept; they are dropped from the solve and left at zero.
    std::vector<int> keep;
    for (int j = 0; j < p; ++j) {
      const double first = lin(static_cast<std::size_t>(0) * 24 + s, j);
      bool varies = false;
      for (int i = 1; i < n && !varies; ++i)
        varies = lin(static_cast<std::size_t>(i) * 24 + s, j) != first;
      if (varies) keep.push_back(j);
    }
    Matrix x(n, keep.size() + 1);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      for (std::size_t k = 0; k < keep.size(); ++k)
        x(i, k + 1) = lin(static_cast<std::size_t>(i) * 24 + s, keep[k]);
      ys(i, 0) = y(i, s);
    }
    const Matrix b = ols_fit_auto(x, ys);
    coef(s, 0) = b(0, 0);
    for (std::size_t k = 0; k < keep.size(); ++k) coef(s, keep[k] + 1) = b(k + 1, 0);
  }
  return coef;
}

namespace {

// A window whose target is constant cannot be standardized; the honest
// fallback is the constant itself.
bool constant_target_window(const data::FeatureSets& fs, int begin, int end, Matrix& mean_out) {
  bool degenerate = false;
  mean_out = Matrix(24, 1);
  for (int s = 0; s < 24; ++s) {
    double m = 0.0;
    bool constant = true;
    for (int i = begin; i < end; ++i) {
      m += fs.targets(i, s);
      if (fs.targets(i, s) != fs.targets(begin, s)) constant = false;
    }
    mean_out(s, 0) = m / static_cast<double>(end - begin);
    if (constant) degenerate = true;
  }
  return degenerate;
}

model::DayInput day_input(const data::FeatureSets& fs, const data::StandardizationParams& sp,
                          const model::ModelSpec& spec, int sample) {
  model::DayInput in;
  if (has_rnn(spec.arch) || has_kf(spec.arch))
    in.rnn_seq = data::standardize_rows(fs.rnn_slice(sample - spec.seq_len + 1, sample + 1),
                                        sp.rnn_mu, sp.rnn_sigma);
  if (has_lem(spec.arch))
    in.lem_rows = data::standardize_rows(fs.lin_slice(sample, sample + 1), sp.lin_mu,
                                         sp.lin_sigma);
  return in;
}

}  // namespace

std::vector<ForecastRecord> rolling_forecast(const data::FeatureSets& fs,
                                             const model::ModelSpec& spec, const TrainConfig& cfg,
                                             const RollingPlan& plan, Rng rng,
                                             RollingArtifacts* artifacts) {
  spec.validate();
  cfg.validate();
  plan.validate(fs.count);
  if (plan.forecast_begin - plan.d_init - (spec.seq_len - 1) < 0)
    fail(ErrorCode::InsufficientHistory,
         "initial window plus sequence context does not fit before the forecast start");

  std::vector<ForecastRecord> records;
  records.reserve(plan.forecast_end - plan.forecast_begin);

  model::ModelState state;
  bool have_state = false;

  for (int target = plan.forecast_begin; target < plan.forecast_end; ++target) {
    const bool first = target == plan.forecast_begin;
    const int window = first ? plan.d_init : std::min(plan.d_all, target - (spec.seq_len - 1));
    const int begin = target - window;
    const PhaseConfig& phase = first ? cfg.init : cfg.update;

    ForecastRecord rec;
    rec.sample = target;
    rec.date = fs.date(target);
    rec.actual = fs.target_slice(target, target + 1).transposed();

    Matrix window_mean;
    if (constant_target_window(fs, begin, target, window_mean)) {
      rec.combined = window_mean;
      rec.y_mu = window_mean.transposed();
      rec.y_sigma = Matrix::filled(1, 24, 0.0);
      rec.degenerate_window = true;
      records.push_back(std::move(rec));
      continue;
    }

    const data::StandardizationParams sp = data::fit_standardizer(fs, begin, target);

    if (first || !plan.warm_start || !have_state) {
      const bool want_ols = spec.use_ols && has_lem(spec.arch);
      Matrix ols;
      if (want_ols) ols = ols_warm_start(fs, sp, begin, target);
      state = model::init_weights(spec, rng, want_ols ? &ols : nullptr);
      have_state = true;
    }

    WindowResult wr =
        train_window(fs, sp, begin, target, spec, phase, cfg, std::move(state), rng);
    state = std::move(wr.state);

    const model::BranchOutputs out = model::forward(spec, state, day_input(fs, sp, spec, target));
    const model::Decomposition dec = model::decompose(spec, out, sp.y_mu, sp.y_sigma);
    rec.combined = dec.combined;
    rec.lem = dec.lem;
    rec.rnn = dec.rnn;
    rec.kf = dec.kf;
    rec.y_mu = sp.y_mu;
    rec.y_sigma = sp.y_sigma;
    rec.loss_trace = std::move(wr.loss_trace);
    records.push_back(std::move(rec));
    if (artifacts) {
      artifacts->final_state = state;
      artifacts->last_standardization = sp;
      artifacts->valid = true;
    }
  }
  return records;
}

void write_forecast_csv(const std::string& path, const std::vector<ForecastRecord>& records,
                        const model::ModelSpec& spec) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ParseError, "cannot write '" + path + "'");
  out << "date,hour,forecast,actual,lem_component,rnn_component,kf_component\n";
  char num[64];
  auto fmt = [&](double v) {
    std::snprintf(num, sizeof(num), "%.10g", v);
    return std::string(num);
  };
  for (const auto& r : records) {
    const std::string date = data::to_string(r.date);
    for (int s = 0; s < 24; ++s) {
      out << date << ',' << s << ',' << fmt(r.combined(s, 0)) << ',' << fmt(r.actual(s, 0)) << ',';
      if (has_lem(spec.arch) && r.lem) out << fmt((*r.lem)(s, 0));
      out << ',';
      if (has_rnn(spec.arch) && r.rnn) out << fmt((*r.rnn)(s, 0));
      out << ',';
      if (has_kf(spec.arch) && r.kf) out << fmt((*r.kf)(s, 0));
      out << '\n';
    }
  }
}

ForecastTable read_forecast_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::ParseError, "empty forecast file");

  struct Row {
    data::CivilDate date;
    int hour;
    double forecast, actual;
    std::optional<double> lem, rnn, kf;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        f.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    f.push_back(cur);
    if (f.size() != 7)
      fail(ErrorCode::ParseError, "forecast row " + std::to_string(lineno) + ": bad field count");
    Row r;
    r.date = data::parse_date(f[0]);
    r.hour = std::stoi(f[1]);
    r.forecast = std::stod(f[2]);
    r.actual = std::stod(f[3]);
    if (!f[4].empty()) r.lem = std::stod(f[4]);
    if (!f[5].empty()) r.rnn = std::stod(f[5]);
    if (!f[6].empty()) r.kf = std::stod(f[6]);
    rows.push_back(r);
  }
  if (rows.empty() || rows.size() % 24 != 0)
    fail(ErrorCode::ParseError, "forecast file must hold whole days");

  const std::size_t days = rows.size() / 24;
  ForecastTable t;
  t.actual = Matrix(days, 24);
  t.forecast = Matrix(days, 24);
  const bool has_lem_col = rows[0].lem.has_value();
  const bool has_rnn_col = rows[0].rnn.has_value();
  const bool has_kf_col = rows[0].kf.has_value();
  if (has_lem_col) t.lem = Matrix(days, 24);
  if (has_rnn_col) t.rnn = Matrix(days, 24);
  if (has_kf_col) t.kf = Matrix(days, 24);
  for (std::size_t d = 0; d < days; ++d) {
    t.dates.push_back(rows[d * 24].date);
    for (int s = 0; s < 24; ++s) {
      const Row& r = rows[d * 24 + s];
      if (r.hour != s)
        fail(ErrorCode::ParseError, "forecast file hours out of order near day " +
                                        data::to_string(rows[d * 24].date));
      t.forecast(d, s) = r.forecast;
      t.actual(d, s) = r.actual;
      if (has_lem_col) (*t.lem)(d, s) = r.lem.value_or(0.0);
      if (has_rnn_col) (*t.rnn)(d, s) = r.rnn.value_or(0.0);
      if (has_kf_col) (*t.kf)(d, s) = r.kf.value_or(0.0);
    }
  }
  return t;
}

}  // namespace epf::train
