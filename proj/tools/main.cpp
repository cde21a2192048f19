// Command-line front end: synth, prepare, tune, backtest, evaluate, decompose.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "epf/config.hpp"
#include "epf/error.hpp"
#include "epf/features.hpp"
#include "epf/hpo.hpp"
#include "epf/metrics.hpp"
#include "epf/model.hpp"
#include "epf/synth.hpp"
#include "epf/train.hpp"

namespace fs = std::filesystem;
using namespace epf;

namespace {

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ParseError:
    case ErrorCode::GapError:
    case ErrorCode::RangeError:
    case ErrorCode::DegenerateColumn:
      return cli::kExitValidation;
    case ErrorCode::InsufficientHistory:
      return cli::kExitInsufficientHistory;
    case ErrorCode::TrialFailed:
    case ErrorCode::AllTrialsFailed:
      return cli::kExitTuningFailure;
    default:
      return cli::kExitInternal;
  }
}

cli::ManifestEntry manifest_entry(const std::string& path) {
  cli::ManifestEntry e;
  e.path = path;
  e.bytes = fs::file_size(path);
  e.hash = cli::file_hash(path);
  return e;
}

void finish_manifest(const cli::RunConfig& cfg, const std::string& command,
                     const std::string& data_hash, const std::vector<std::string>& outputs) {
  cli::Manifest m;
  m.command = command;
  m.seed = cfg.seed;
  m.config_hash = cli::config_hash(cfg);
  m.data_hash = data_hash;
  for (const auto& p : outputs) m.outputs.push_back(manifest_entry(p));
  cli::write_manifest((fs::path(cfg.out_dir) / ("manifest_" + command + ".json")).string(), m);
}

std::string out_path(const cli::RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / name).string();
}

data::FeatureSets features_from_cache(const std::string& cache_path, std::string& data_hash) {
  const data::DailyCache cache = data::load_daily_cache(cache_path);
  data_hash = cache.source_hash;
  return data::build_features(cache.dm, cache.config);
}

int cmd_synth(const cli::RunConfig& cfg, const std::string& out_file) {
  data::ScenarioConfig sc;
  sc.scenario = data::scenario_from_string(cfg.synth.scenario);
  sc.noise_std = cfg.synth.noise_std;
  sc.spike_prob = cfg.synth.spike_prob;
  sc.start = data::parse_date(cfg.synth.start_date);
  Rng rng(cfg.seed);
  const data::HourlyPanel panel = data::synth_generate(rng, cfg.synth.days, sc);
  const std::string path = out_file.empty() ? out_path(cfg, "synth.csv") : out_file;
  if (!fs::path(path).parent_path().empty()) fs::create_directories(fs::path(path).parent_path());
  data::write_panel_csv(path, panel);
  fs::create_directories(cfg.out_dir);
  finish_manifest(cfg, "synth", cli::file_hash(path), {path});
  std::printf("wrote %s (%d days, scenario %s)\n", path.c_str(), cfg.synth.days,
              cfg.synth.scenario.c_str());
  return cli::kExitOk;
}

int cmd_prepare(const cli::RunConfig& cfg, const std::string& cache_file,
                const std::string& stats_file) {
  if (cfg.data_path.empty()) fail(ErrorCode::ParseError, "prepare needs --data");
  const std::string data_hash = cli::file_hash(cfg.data_path);
  const data::HourlyPanel panel = data::load_csv(cfg.data_path);
  const data::DailyMatrix dm = data::to_daily(panel, cfg.features);

  const std::string cache = cache_file.empty() ? out_path(cfg, "cache.json") : cache_file;
  data::save_daily_cache(cache, dm, cfg.features, data_hash);

  const auto stats = data::summarize(panel);
  const std::string stats_path = stats_file.empty() ? out_path(cfg, "stats.csv") : stats_file;
  {
    std::FILE* f = std::fopen(stats_path.c_str(), "w");
    if (!f) fail(ErrorCode::ParseError, "cannot write '" + stats_path + "'");
    std::fprintf(f, "series,mean,std,min,q25,median,q75,max\n");
    for (const auto& s : stats)
      std::fprintf(f, "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", s.name.c_str(), s.mean, s.stddev,
                   s.min, s.q25, s.median, s.q75, s.max);
    std::fclose(f);
  }

  std::printf("%-18s %10s %10s %10s %10s %10s %10s %10s\n", "series", "mean", "std", "min", "q25",
              "median", "q75", "max");
  for (const auto& s : stats)
    std::printf("%-18s %10.2f %10.2f %10.2f %10.2f %10.2f %10.2f %10.2f\n", s.name.c_str(),
                s.mean, s.stddev, s.min, s.q25, s.median, s.q75, s.max);
  std::printf("%d complete days -> %s\n", dm.days, cache.c_str());

  finish_manifest(cfg, "prepare", data_hash, {cache, stats_path});
  return cli::kExitOk;
}

int cmd_tune(const cli::RunConfig& cfg, const std::string& cache_file,
             const std::string& best_file, const std::string& history_file) {
  std::string data_hash;
  const data::FeatureSets feats = features_from_cache(cache_file, data_hash);
  const model::Arch arch = model::arch_from_string(cfg.arch);

  const int test_days = cfg.split.test_days;
  const int val_days = cfg.split.val_days;
  const int val_end = feats.count - test_days;
  const int val_begin = val_end - val_days;
  if (val_begin < 38)
    fail(ErrorCode::InsufficientHistory,
         "validation range needs at least 38 earlier days for the initial window");

  const hpo::SearchSpace space =
      hpo::SearchSpace::defaults_capped(val_begin - 6, std::min(365, val_begin - 6));
  const hpo::SamplerKind sampler = hpo::sampler_from_string(cfg.tune.sampler);
  int workers = cfg.tune.workers;
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;

  const hpo::OptimizeResult res =
      hpo::optimize(space, cfg.tune.budget, sampler, feats, arch, val_begin, val_end, cfg.seed,
                    workers);

  const std::string best = best_file.empty() ? out_path(cfg, "best_params.json") : best_file;
  const std::string hist = history_file.empty() ? out_path(cfg, "tune_history.csv") : history_file;
  hpo::write_best_params(best, res.best, arch, cfg.seed);
  hpo::write_history_csv(hist, res.history);
  finish_manifest(cfg, "tune", data_hash, {best, hist});
  std::printf("best trial %d: rmse %.4f EUR/MWh over %d validation days (%zu trials)\n",
              res.best.id, res.best.rmse, val_days, res.history.size());
  return cli::kExitOk;
}

int cmd_backtest(const cli::RunConfig& cfg, const std::string& cache_file,
                 const std::string& params_file, const std::string& out_file,
                 const std::string& model_file, bool cold_start) {
  std::string data_hash;
  const data::FeatureSets feats = features_from_cache(cache_file, data_hash);

  hpo::HyperParams hp = cfg.params;
  model::Arch arch = model::arch_from_string(cfg.arch);
  if (!params_file.empty()) {
    auto [file_hp, file_arch] = hpo::read_best_params(params_file);
    hp = file_hp;
    arch = file_arch;
  }
  hp = hpo::masked(hp, arch);

  const model::ModelSpec spec = hpo::to_model_spec(hp, arch, feats);
  const train::TrainConfig tc = hpo::to_train_config(hp);
  train::RollingPlan plan;
  plan.d_init = hp.d_init;
  plan.d_all = hp.d_all;
  plan.forecast_end = feats.count;
  plan.forecast_begin = feats.count - cfg.split.test_days;
  plan.warm_start = !cold_start;

  train::RollingArtifacts artifacts;
  const auto records =
      train::rolling_forecast(feats, spec, tc, plan, Rng(cfg.seed), &artifacts);

  const std::string path = out_file.empty() ? out_path(cfg, "forecast.csv") : out_file;
  if (!fs::path(path).parent_path().empty()) fs::create_directories(fs::path(path).parent_path());
  train::write_forecast_csv(path, records, spec);

  std::vector<std::string> outputs = {path};
  if (!model_file.empty() && artifacts.valid) {
    model::save_checkpoint(model_file,
                           {spec, artifacts.final_state, artifacts.last_standardization});
    outputs.push_back(model_file);
  }
  finish_manifest(cfg, "backtest", data_hash, outputs);
  std::printf("wrote %s (%zu forecast days, arch %s)\n", path.c_str(), records.size(),
              model::to_string(arch).c_str());
  return cli::kExitOk;
}

int cmd_evaluate(const cli::RunConfig& cfg, const std::string& cache_file,
                 const std::vector<std::string>& forecast_args) {
  if (forecast_args.empty()) fail(ErrorCode::ParseError, "evaluate needs at least one --forecast");
  std::string data_hash;
  const data::FeatureSets feats = features_from_cache(cache_file, data_hash);

  std::vector<std::string> names;
  std::vector<Matrix> forecasts;
  Matrix actual;
  int begin = -1, end = -1;

  for (const std::string& arg : forecast_args) {
    const auto pos = arg.find('=');
    const std::string name = pos == std::string::npos ? fs::path(arg).stem().string()
                                                      : arg.substr(0, pos);
    const std::string path = pos == std::string::npos ? arg : arg.substr(pos + 1);
    const train::ForecastTable t = train::read_forecast_csv(path);

    const int b = static_cast<int>(data::days_from_civil(t.dates.front()) -
                                   data::days_from_civil(feats.day0_date));
    const int e = b + static_cast<int>(t.dates.size());
    if (b < 7 || e > feats.count)
      fail(ErrorCode::RangeError, "forecast '" + name + "' lies outside the cached data");
    if (begin < 0) {
      begin = b;
      end = e;
      actual = t.actual;
    } else if (b != begin || e != end) {
      fail(ErrorCode::RangeError, "forecast files cover different date ranges");
    }
    names.push_back(name);
    forecasts.push_back(t.forecast);
  }

  const Matrix naive = eval::weekly_naive_matrix(feats.targets, begin, end);
  const eval::EvalReport rep = eval::evaluate(names, actual, forecasts, naive);
  if (rep.small_sample)
    std::fprintf(stderr, "warning: fewer than 30 evaluation days; GW p-values are unreliable\n");

  const std::string metrics = out_path(cfg, "metrics.csv");
  const std::string gw = out_path(cfg, "gw_matrix.csv");
  const std::string hourly = out_path(cfg, "metrics_per_hour.csv");
  eval::write_metrics_csv(metrics, rep);
  eval::write_gw_csv(gw, rep);
  eval::write_per_hour_csv(hourly, rep);
  finish_manifest(cfg, "evaluate", data_hash, {metrics, gw, hourly});

  for (std::size_t i = 0; i < rep.models.size(); ++i)
    std::printf("%-20s rmse %8.3f  mae %8.3f  rmae %6.3f\n", rep.models[i].c_str(), rep.rmse[i],
                rep.mae[i], rep.rmae[i]);
  return cli::kExitOk;
}

int cmd_decompose(const cli::RunConfig& cfg, const std::string& forecast_file) {
  const train::ForecastTable t = train::read_forecast_csv(forecast_file);
  const std::size_t days = t.dates.size();

  auto row_mean = [](const Matrix& m, std::size_t r) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += m(r, j);
    return s / static_cast<double>(m.cols());
  };
  auto col_mean = [](const Matrix& m, std::size_t c) {
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, c);
    return s / static_cast<double>(m.rows());
  };

  const std::string daily = out_path(cfg, "decompose_daily.csv");
  {
    std::FILE* f = std::fopen(daily.c_str(), "w");
    if (!f) fail(ErrorCode::ParseError, "cannot write '" + daily + "'");
    std::fprintf(f, "date,actual,combined,lem_component,rnn_component,kf_component\n");
    for (std::size_t d = 0; d < days; ++d) {
      std::fprintf(f, "%s,%.6f,%.6f", data::to_string(t.dates[d]).c_str(), row_mean(t.actual, d),
                   row_mean(t.forecast, d));
      if (t.lem) std::fprintf(f, ",%.6f", row_mean(*t.lem, d)); else std::fprintf(f, ",");
      if (t.rnn) std::fprintf(f, ",%.6f", row_mean(*t.rnn, d)); else std::fprintf(f, ",");
      if (t.kf) std::fprintf(f, ",%.6f", row_mean(*t.kf, d)); else std::fprintf(f, ",");
      std::fprintf(f, "\n");
    }
    std::fclose(f);
  }

  const std::string hourly = out_path(cfg, "decompose_hourly.csv");
  {
    std::FILE* f = std::fopen(hourly.c_str(), "w");
    if (!f) fail(ErrorCode::ParseError, "cannot write '" + hourly + "'");
    std::fprintf(f, "hour,actual,combined,lem_component,rnn_component,kf_component\n");
    for (int s = 0; s < 24; ++s) {
      std::fprintf(f, "%d,%.6f,%.6f", s, col_mean(t.actual, s), col_mean(t.forecast, s));
      if (t.lem) std::fprintf(f, ",%.6f", col_mean(*t.lem, s)); else std::fprintf(f, ",");
      if (t.rnn) std::fprintf(f, ",%.6f", col_mean(*t.rnn, s)); else std::fprintf(f, ",");
      if (t.kf) std::fprintf(f, ",%.6f", col_mean(*t.kf, s)); else std::fprintf(f, ",");
      std::fprintf(f, "\n");
    }
    std::fclose(f);
  }

  finish_manifest(cfg, "decompose", cli::file_hash(forecast_file), {daily, hourly});
  std::printf("wrote %s and %s (%zu days)\n", daily.c_str(), hourly.c_str(), days);
  return cli::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parallel-branch day-ahead electricity price forecasting engine"};
  app.require_subcommand(1);

  std::string config_path;
  cli::RunConfig cfg;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);

  // global overrides
  std::uint64_t seed_flag = 0;
  bool seed_set = false;
  std::string out_dir_flag, arch_flag;
  app.add_option_function<std::uint64_t>(
         "--seed", [&](std::uint64_t v) { seed_flag = v; seed_set = true; }, "Random seed");
  app.add_option("--out-dir", out_dir_flag, "Output directory");
  app.add_option("--arch", arch_flag, "Architecture")
      ->check(CLI::IsMember({"rnn", "kf", "lem", "lem-rnn", "kf-rnn", "lem-kf-rnn"}));

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic market CSV");
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output CSV path");
  synth->add_option("--scenario", cfg.synth.scenario, "flat|linear|nonlinear|mixed");
  synth->add_option("--days", cfg.synth.days, "Number of days");
  synth->add_option("--noise", cfg.synth.noise_std, "Price noise stddev (-1 = scenario default)");
  synth->add_option("--spike-prob", cfg.synth.spike_prob, "Daily spike probability");
  synth->add_option("--start", cfg.synth.start_date, "First day (YYYY-MM-DD)");

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Validate a CSV and build the daily cache");
  std::string prep_data, prep_cache, prep_stats;
  prepare->add_option("--data", prep_data, "Input hourly CSV")->required();
  prepare->add_option("--cache", prep_cache, "Cache output path");
  prepare->add_option("--stats", prep_stats, "Summary statistics CSV path");
  prepare->add_flag("--no-merge-wind", "Keep onshore/offshore wind separate");

  // tune
  auto* tune = app.add_subcommand("tune", "Hyperparameter search on the validation range");
  std::string tune_cache, tune_best, tune_hist;
  tune->add_option("--cache", tune_cache, "Daily cache")->required()->check(CLI::ExistingFile);
  tune->add_option("--budget", cfg.tune.budget, "Number of trials");
  tune->add_option("--sampler", cfg.tune.sampler, "random|tpe");
  tune->add_option("--workers", cfg.tune.workers, "Worker threads (0 = cores)");
  tune->add_option("--val-days", cfg.split.val_days, "Validation days");
  tune->add_option("--test-days", cfg.split.test_days, "Reserved test days");
  tune->add_option("--best-out", tune_best, "Best-params output path");
  tune->add_option("--history-out", tune_hist, "Trial history output path");

  // backtest
  auto* backtest = app.add_subcommand("backtest", "Rolling out-of-sample forecast");
  std::string bt_cache, bt_params, bt_out, bt_model;
  bool bt_cold = false;
  backtest->add_option("--cache", bt_cache, "Daily cache")->required()->check(CLI::ExistingFile);
  backtest->add_option("--params", bt_params, "Best-params JSON")->check(CLI::ExistingFile);
  backtest->add_option("--test-days", cfg.split.test_days, "Days to forecast at the end");
  backtest->add_option("--out", bt_out, "Forecast CSV path");
  backtest->add_option("--save-model", bt_model, "Write the final model checkpoint here");
  backtest->add_flag("--cold-start", bt_cold, "Re-initialize weights every window");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Metrics and GW tests over forecast files");
  std::string ev_cache;
  std::vector<std::string> ev_forecasts;
  evaluate->add_option("--cache", ev_cache, "Daily cache")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--forecast", ev_forecasts, "name=forecast.csv (repeatable)")->required();

  // decompose
  auto* decompose = app.add_subcommand("decompose", "Branch contribution series");
  std::string dc_forecast;
  decompose->add_option("--forecast", dc_forecast, "Forecast CSV")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!config_path.empty()) {
      // the file provides defaults; every flag the user actually passed wins
      cli::RunConfig file_cfg = cli::load_run_config(config_path);
      if (!synth->count("--scenario")) cfg.synth.scenario = file_cfg.synth.scenario;
      if (!synth->count("--days")) cfg.synth.days = file_cfg.synth.days;
      if (!synth->count("--noise")) cfg.synth.noise_std = file_cfg.synth.noise_std;
      if (!synth->count("--spike-prob")) cfg.synth.spike_prob = file_cfg.synth.spike_prob;
      if (!synth->count("--start")) cfg.synth.start_date = file_cfg.synth.start_date;
      if (!tune->count("--budget")) cfg.tune.budget = file_cfg.tune.budget;
      if (!tune->count("--sampler")) cfg.tune.sampler = file_cfg.tune.sampler;
      if (!tune->count("--workers")) cfg.tune.workers = file_cfg.tune.workers;
      if (!tune->count("--val-days")) cfg.split.val_days = file_cfg.split.val_days;
      const bool test_days_set =
          tune->count("--test-days") || backtest->count("--test-days");
      if (!test_days_set) cfg.split.test_days = file_cfg.split.test_days;
      cfg.split.train_days = file_cfg.split.train_days;
      cfg.params = file_cfg.params;
      cfg.features = file_cfg.features;
      cfg.seed = file_cfg.seed;
      cfg.out_dir = file_cfg.out_dir;
      cfg.arch = file_cfg.arch;
      cfg.data_path = file_cfg.data_path;
    }
    if (seed_set) cfg.seed = seed_flag;
    if (!out_dir_flag.empty()) cfg.out_dir = out_dir_flag;
    if (!arch_flag.empty()) cfg.arch = arch_flag;
    if (prepare->parsed()) {
      cfg.data_path = prep_data;
      if (prepare->count("--no-merge-wind")) cfg.features.merge_wind = false;
    }

    if (synth->parsed()) return cmd_synth(cfg, synth_out);
    if (prepare->parsed()) return cmd_prepare(cfg, prep_cache, prep_stats);
    if (tune->parsed()) return cmd_tune(cfg, tune_cache, tune_best, tune_hist);
    if (backtest->parsed()) return cmd_backtest(cfg, bt_cache, bt_params, bt_out, bt_model, bt_cold);
    if (evaluate->parsed()) return cmd_evaluate(cfg, ev_cache, ev_forecasts);
    if (decompose->parsed()) return cmd_decompose(cfg, dc_forecast);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return cli::kExitInternal;
  }
  return cli::kExitOk;
}
