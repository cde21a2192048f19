#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "epf/features.hpp"
#include "epf/model.hpp"
#include "epf/rng.hpp"

namespace epf::train {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Reproduces the uncorrected update m/(sqrt(v)+eps); the default applies
  // the standard bias correction.
  bool raw_adam = false;
};

// Learning-rate / penalty / epoch bundle; one for the initial window, one
// for the rolling updates.
struct PhaseConfig {
  double lr = 1e-3;
  double weight_decay = 1e-5;  // decoupled, applied in the optimizer
  double l1 = 1e-5;            // charged on output-side linear maps
  int epochs = 50;
};

struct SchedulerConfig {
  double factor = 0.5;
  int patience = 5;
  double rel_threshold = 1e-4;
  double lr_floor = 1e-7;
};

struct TrainConfig {
  PhaseConfig init;
  PhaseConfig update{1e-3, 1e-5, 1e-5, 10};
  int batch_size = 32;
  double clip_norm = 5.0;
  AdamConfig adam;
  SchedulerConfig scheduler;

  void validate() const;
};

struct OptimizerState {
  std::map<int, Matrix> m, v;
  long step = 0;
  void reset() {
    m.clear();
    v.clear();
    step = 0;
  }
};

// Elementwise mean squared error plus the L1 charge on output-side maps
// (the LEM intercept column is exempt). Weight decay is not part of the
// reported loss; it acts directly on the parameters inside adam_step.
double loss(const Matrix& predictions, const Matrix& targets, const model::ModelSpec& spec,
            const model::ModelState& state, double lambda1);

// Rescales the gradient set so its global L2 norm is at most clip_norm.
// Returns the pre-clip norm. Throws NonFiniteGradient on NaN/Inf.
double clip_gradients(std::map<int, Matrix>& grads, double clip_norm);

// One clipped, decoupled-weight-decay Adam step over every present block.
void adam_step(const model::ModelSpec& spec, model::ModelState& state, OptimizerState& opt,
               std::map<int, Matrix> grads, double lr, double weight_decay, double clip_norm,
               const AdamConfig& adam);

// Halves the rate after `patience` consecutive epochs without a relative
// improvement, never below lr_floor.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, const SchedulerConfig& cfg) : cfg_(cfg), lr_(lr) {}
  double observe(double loss);
  double lr() const { return lr_; }

 private:
  SchedulerConfig cfg_;
  double lr_;
  double best_ = 0.0;
  bool seen_ = false;
  int bad_ = 0;
};

double scheduler_step(double initial_lr, const std::vector<double>& loss_history,
                      const SchedulerConfig& cfg = {});

// Tape loss over one minibatch: MSE / (24 n) + lambda1 * L1(output side).
TapeValue training_loss_tape(Tape& tape, const model::ModelSpec& spec,
                             const model::TapeParams& params, const model::BatchInputs& in,
                             const Matrix& targets, double lambda1);

struct WindowResult {
  model::ModelState state;
  std::vector<double> loss_trace;  // one entry per epoch
};

// Minibatch Adam over window samples [begin, end). Shuffling, dropout masks
// and everything else downstream of `rng` is deterministic in the stream.
WindowResult train_window(const data::FeatureSets& fs, const data::StandardizationParams& sp,
                          int begin, int end, const model::ModelSpec& spec,
                          const PhaseConfig& phase, const TrainConfig& cfg,
                          model::ModelState state, Rng& rng);

struct RollingPlan {
  int d_init = 365;
  int d_all = 90;
  int forecast_begin = 0;  // sample indices into the FeatureSets
  int forecast_end = 0;    // exclusive
  bool warm_start = true;

  void validate(int available_samples) const;
};

struct ForecastRecord {
  int sample = 0;
  data::CivilDate date;
  Matrix combined;  // 24 x 1, EUR/MWh
  std::optional<Matrix> lem, rnn, kf;
  Matrix actual;  // 24 x 1
  Matrix y_mu, y_sigma;  // target standardization of the producing window
  std::vector<double> loss_trace;
  bool degenerate_window = false;
};

// Per-hour OLS of the standardized window targets on the standardized
// design rows with an intercept; rows are hours. Used for warm starts.
Matrix ols_warm_start(const data::FeatureSets& fs, const data::StandardizationParams& sp,
                      int begin, int end);

struct RollingArtifacts {
  model::ModelState final_state;
  data::StandardizationParams last_standardization;
  bool valid = false;
};

// The rolling out-of-sample loop: day one trains on d_init days with the
// init phase, every later day re-trains on the most recent d_all days with
// the update phase, warm-started unless disabled. Standardization is re-fit
// on every window; forecasts only ever see data before their target day.
std::vector<ForecastRecord> rolling_forecast(const data::FeatureSets& fs,
                                             const model::ModelSpec& spec, const TrainConfig& cfg,
                                             const RollingPlan& plan, Rng rng,
                                             RollingArtifacts* artifacts = nullptr);

void write_forecast_csv(const std::string& path, const std::vector<ForecastRecord>& records,
                        const model::ModelSpec& spec);

// Forecast CSV parsed back into matrices (one row per day).
struct ForecastTable {
  std::vector<data::CivilDate> dates;
  Matrix actual, forecast;              // T x 24
  std::optional<Matrix> lem, rnn, kf;   // present when the column is populated
};

ForecastTable read_forecast_csv(const std::string& path);

}  // namespace epf::train
