#include "epf/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "epf/error.hpp"
#include "epf/metrics.hpp"

namespace epf::hpo {

HyperParams masked(HyperParams hp, model::Arch arch) {
  if (!has_lem(arch)) {
    hp.use_ols = false;
    hp.ols_scale = 0.0;
  }
  if (!has_rnn(arch) && !has_kf(arch)) {
    hp.hidden = 1;
    hp.seq_len = 1;
    hp.dropout = 0.0;
  }
  return hp;
}

model::ModelSpec to_model_spec(const HyperParams& hp, model::Arch arch,
                               const data::FeatureSets& fs) {
  const HyperParams m = masked(hp, arch);
  model::ModelSpec spec;
  spec.arch = arch;
  spec.hidden = m.hidden;
  spec.seq_len = m.seq_len;
  spec.dropout = m.dropout;
  spec.use_ols = m.use_ols;
  spec.ols_scale = m.ols_scale;
  spec.rnn_width = fs.rnn_width;
  spec.lin_width = fs.lin_width;
  return spec;
}

train::TrainConfig to_train_config(const HyperParams& hp) {
  train::TrainConfig cfg;
  cfg.init = {hp.lr_init, hp.wd_init, hp.l1_init, hp.epochs_init};
  cfg.update = {hp.lr_all, hp.wd_all, hp.l1_all, hp.epochs_all};
  cfg.batch_size = hp.batch;
  cfg.clip_norm = hp.clip;
  return cfg;
}

Domain Domain::int_range(int lo, int hi) {
  Domain d;
  d.kind = Kind::int_range;
  d.lo = lo;
  d.hi = hi;
  return d;
}

Domain Domain::real_uniform(double lo, double hi) {
  Domain d;
  d.kind = Kind::real_uniform;
  d.lo = lo;
  d.hi = hi;
  return d;
}

Domain Domain::real_log(double lo, double hi) {
  Domain d;
  d.kind = Kind::real_log;
  d.lo = lo;
  d.hi = hi;
  return d;
}

Domain Domain::int_choice(std::vector<int> choices) {
  Domain d;
  d.kind = Kind::int_choice;
  d.choices = std::move(choices);
  return d;
}

Domain Domain::boolean() {
  Domain d;
  d.kind = Kind::boolean;
  return d;
}

const Domain& SearchSpace::at(const std::string& name) const {
  for (const auto& [n, d] : dims)
    if (n == name) return d;
  fail(ErrorCode::RangeError, "unknown search dimension '" + name + "'");
}

SearchSpace SearchSpace::defaults() {
  SearchSpace s;
  s.dims = {
      {"H", Domain::int_range(1, 128)},
      {"L", Domain::int_range(1, 7)},
      {"D_init", Domain::int_range(30, 730)},
      {"D_all", Domain::int_range(2, 365)},
      {"E_init", Domain::int_choice({10, 20, 50, 100})},
      {"E_all", Domain::int_choice({5, 10, 20, 50})},
      {"eta_init", Domain::real_log(1e-5, 1e-2)},
      {"eta_all", Domain::real_log(1e-4, 1e-2)},
      {"lw_init", Domain::real_log(1e-8, 1e-2)},
      {"lw_all", Domain::real_log(1e-8, 1e-2)},
      {"l1_init", Domain::real_log(1e-6, 1e-1)},
      {"l1_all", Domain::real_log(1e-6, 1e-1)},
      {"alpha", Domain::real_uniform(0.0, 2.0)},
      {"use_ols", Domain::boolean()},
      {"B", Domain::int_choice({8, 16, 32, 64})},
      {"c_grad", Domain::real_uniform(0.1, 10.0)},
      {"p_drop", Domain::real_uniform(0.0, 0.5)},
  };
  return s;
}

SearchSpace SearchSpace::defaults_capped(int max_d_init, int max_d_all) {
  SearchSpace s = defaults();
  for (auto& [name, d] : s.dims) {
    if (name == "D_init") d.hi = std::max(static_cast<double>(d.lo), double(max_d_init));
    if (name == "D_all") d.hi = std::max(static_cast<double>(d.lo), double(max_d_all));
  }
  return s;
}

SamplerKind sampler_from_string(const std::string& s) {
  if (s == "random") return SamplerKind::random;
  if (s == "tpe") return SamplerKind::tpe;
  fail(ErrorCode::ParseError, "unknown sampler '" + s + "'");
}

std::string to_string(SamplerKind s) { return s == SamplerKind::random ? "random" : "tpe"; }

namespace {

constexpr int kTpeStartup = 10;
constexpr int kTpeCandidates = 24;
constexpr double kTpeGamma = 0.25;

double get_dim(const HyperParams& hp, const std::string& name) {
  if (name == "H") return hp.hidden;
  if (name == "L") return hp.seq_len;
  if (name == "D_init") return hp.d_init;
  if (name == "D_all") return hp.d_all;
  if (name == "E_init") return hp.epochs_init;
  if (name == "E_all") return hp.epochs_all;
  if (name == "eta_init") return hp.lr_init;
  if (name == "eta_all") return hp.lr_all;
  if (name == "lw_init") return hp.wd_init;
  if (name == "lw_all") return hp.wd_all;
  if (name == "l1_init") return hp.l1_init;
  if (name == "l1_all") return hp.l1_all;
  if (name == "alpha") return hp.ols_scale;
  if (name == "use_ols") return hp.use_ols ? 1.0 : 0.0;
  if (name == "B") return hp.batch;
  if (name == "c_grad") return hp.clip;
  if (name == "p_drop") return hp.dropout;
  fail(ErrorCode::RangeError, "unknown dimension '" + name + "'");
}

void set_dim(HyperParams& hp, const std::string& name, double v) {
  if (name == "H") hp.hidden = static_cast<int>(v);
  else if (name == "L") hp.seq_len = static_cast<int>(v);
  else if (name == "D_init") hp.d_init = static_cast<int>(v);
  else if (name == "D_all") hp.d_all = static_cast<int>(v);
  else if (name == "E_init") hp.epochs_init = static_cast<int>(v);
  else if (name == "E_all") hp.epochs_all = static_cast<int>(v);
  else if (name == "eta_init") hp.lr_init = v;
  else if (name == "eta_all") hp.lr_all = v;
  else if (name == "lw_init") hp.wd_init = v;
  else if (name == "lw_all") hp.wd_all = v;
  else if (name == "l1_init") hp.l1_init = v;
  else if (name == "l1_all") hp.l1_all = v;
  else if (name == "alpha") hp.ols_scale = v;
  else if (name == "use_ols") hp.use_ols = v != 0.0;
  else if (name == "B") hp.batch = static_cast<int>(v);
  else if (name == "c_grad") hp.clip = v;
  else if (name == "p_drop") hp.dropout = v;
  else fail(ErrorCode::RangeError, "unknown dimension '" + name + "'");
}

double draw_random(const Domain& d, Rng& rng) {
  switch (d.kind) {
    case Domain::Kind::int_range:
      return d.lo + static_cast<double>(rng.uniform_int(
                        static_cast<std::uint64_t>(d.hi - d.lo) + 1));
    case Domain::Kind::real_uniform:
      return rng.uniform(d.lo, d.hi);
    case Domain::Kind::real_log:
      return std::exp(rng.uniform(std::log(d.lo), std::log(d.hi)));
    case Domain::Kind::int_choice:
      return d.choices[rng.uniform_int(d.choices.size())];
    case Domain::Kind::boolean:
      return rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  return d.lo;
}

double kde_density(const std::vector<double>& pts, double bw, double x) {
  double s = 0.0;
  for (double p : pts) {
    const double z = (x - p) / bw;
    s += std::exp(-0.5 * z * z);
  }
  return s / (static_cast<double>(pts.size()) * bw * 2.5066282746310002);
}

// One TPE draw for a numeric dimension: candidates come from the good-split
// KDE; keep the candidate with the best good/bad density ratio.
double draw_tpe_numeric(const Domain& d, const std::vector<double>& good,
                        const std::vector<double>& bad, Rng& rng) {
  const bool log_scale = d.kind == Domain::Kind::real_log;
  auto fwd = [&](double v) { return log_scale ? std::log(v) : v; };
  auto inv = [&](double v) { return log_scale ? std::exp(v) : v; };
  const double tlo = fwd(d.lo), thi = fwd(d.hi);
  const double width = thi - tlo;
  if (width <= 0.0) return d.lo;

  std::vector<double> tg, tb;
  for (double v : good) tg.push_back(fwd(v));
  for (double v : bad) tb.push_back(fwd(v));

  auto scott = [&](const std::vector<double>& v) {
    // Scott's rule with a floor that shrinks only slowly: once the good set
    // clusters, an uncapped bandwidth collapses and the sampler stops
    // exploring the neighbourhood of the optimum.
    const double floor = width / (1.0 + static_cast<double>(v.size()));
    if (v.size() < 2) return std::max(width / 4.0, floor);
    double m = 0.0;
    for (double x : v) m += x;
    m /= v.size();
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= (v.size() - 1.0);
    const double bw = std::sqrt(var) * std::pow(static_cast<double>(v.size()), -0.2);
    return std::max(bw, floor);
  };
  const double bw_g = scott(tg);
  const double bw_b = scott(tb);

  double best_x = tg[0];
  double best_score = -1.0;
  for (int c = 0; c < kTpeCandidates; ++c) {
    const double center = tg[rng.uniform_int(tg.size())];
    double x = center + bw_g * rng.normal();
    x = std::min(std::max(x, tlo), thi);
    const double dg = kde_density(tg, bw_g, x);
    const double db = std::max(kde_density(tb, bw_b, x), 1e-12);
    const double score = dg / db;
    if (score > best_score) {
      best_score = score;
      best_x = x;
    }
  }
  double v = inv(best_x);
  if (d.kind == Domain::Kind::int_range) v = std::round(v);
  return std::min(std::max(v, d.lo), d.hi);
}

double draw_tpe_choice(const Domain& d, const std::vector<double>& good,
                       const std::vector<double>& bad, Rng& rng) {
  std::vector<double> values;
  if (d.kind == Domain::Kind::boolean)
    values = {0.0, 1.0};
  else
    for (int c : d.choices) values.push_back(c);

  auto weights = [&](const std::vector<double>& obs) {
    std::vector<double> w(values.size(), 1.0);  // +1 smoothing
    for (double o : obs)
      for (std::size_t i = 0; i < values.size(); ++i)
        if (o == values[i]) w[i] += 1.0;
    double tot = 0.0;
    for (double x : w) tot += x;
    for (double& x : w) x /= tot;
    return w;
  };
  const auto wg = weights(good);
  const auto wb = weights(bad);

  double best_v = values[0];
  double best_score = -1.0;
  for (int c = 0; c < kTpeCandidates; ++c) {
    // sample from the good distribution
    double u = rng.uniform();
    std::size_t pick = 0;
    for (; pick + 1 < values.size(); ++pick) {
      if (u < wg[pick]) break;
      u -= wg[pick];
    }
    const double score = wg[pick] / wb[pick];
    if (score > best_score) {
      best_score = score;
      best_v = values[pick];
    }
  }
  return best_v;
}

}  // namespace

HyperParams sample(const SearchSpace& space, const std::vector<Trial>& history, Rng& rng,
                   SamplerKind sampler, model::Arch arch) {
  std::vector<const Trial*> complete;
  for (const Trial& t : history)
    if (!t.failed) complete.push_back(&t);

  HyperParams hp;
  const bool use_tpe =
      sampler == SamplerKind::tpe && static_cast<int>(complete.size()) >= kTpeStartup;

  if (!use_tpe) {
    for (const auto& [name, dom] : space.dims) set_dim(hp, name, draw_random(dom, rng));
    return masked(hp, arch);
  }

  // split at the objective's lower quantile
  std::vector<const Trial*> sorted = complete;
  std::sort(sorted.begin(), sorted.end(), [](const Trial* a, const Trial* b) {
    return a->rmse != b->rmse ? a->rmse < b->rmse : a->id < b->id;
  });
  const std::size_t n_good = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(kTpeGamma * static_cast<double>(sorted.size()))));

  for (const auto& [name, dom] : space.dims) {
    std::vector<double> good, bad;
    for (std::size_t i = 0; i < sorted.size(); ++i)
      (i < n_good ? good : bad).push_back(get_dim(sorted[i]->params, name));
    double v;
    if (dom.kind == Domain::Kind::int_choice || dom.kind == Domain::Kind::boolean)
      v = draw_tpe_choice(dom, good, bad, rng);
    else
      v = draw_tpe_numeric(dom, good, bad, rng);
    set_dim(hp, name, v);
  }
  return masked(hp, arch);
}

double objective(const HyperParams& hp, const data::FeatureSets& fs, model::Arch arch,
                 int val_begin, int val_end, std::uint64_t seed, bool warm_start) {
  const HyperParams m = masked(hp, arch);
  const model::ModelSpec spec = to_model_spec(m, arch, fs);
  const train::TrainConfig cfg = to_train_config(m);
  train::RollingPlan plan;
  plan.d_init = m.d_init;
  plan.d_all = m.d_all;
  plan.forecast_begin = val_begin;
  plan.forecast_end = val_end;
  plan.warm_start = warm_start;

  std::vector<train::ForecastRecord> records;
  try {
    records = train::rolling_forecast(fs, spec, cfg, plan, Rng(seed));
  } catch (const Error& e) {
    fail(ErrorCode::TrialFailed, e.what());
  }

  Matrix actual(records.size(), 24), forecast(records.size(), 24);
  for (std::size_t i = 0; i < records.size(); ++i)
    for (int s = 0; s < 24; ++s) {
      actual(i, s) = records[i].actual(s, 0);
      forecast(i, s) = records[i].combined(s, 0);
    }
  return eval::rmse(actual, forecast);
}

OptimizeResult optimize(const SearchSpace& space, int budget, SamplerKind sampler,
                        const data::FeatureSets& fs, model::Arch arch, int val_begin, int val_end,
                        std::uint64_t seed, int workers) {
  if (budget < 1) fail(ErrorCode::RangeError, "budget must be at least 1 trial");
  if (workers < 1) workers = 1;

  const Rng root(seed);
  OptimizeResult res;
  res.history.reserve(budget);

  for (int done = 0; done < budget;) {
    const int batch = std::min(workers, budget - done);
    // Sampling is sequential against the current history snapshot so results
    // do not depend on evaluation timing.
    std::vector<Trial> pending(batch);
    for (int k = 0; k < batch; ++k) {
      const int id = done + k;
      Rng sample_rng = root.split(0x53414D50ULL + id);
      pending[k].id = id;
      pending[k].seed = root.split(id).seed();
      pending[k].params = sample(space, res.history, sample_rng, sampler, arch);
    }

    auto run_one = [&](Trial& t) {
      try {
        t.rmse = objective(t.params, fs, arch, val_begin, val_end, t.seed);
        t.failed = !std::isfinite(t.rmse);
      } catch (const Error&) {
        t.failed = true;
        t.rmse = 0.0;
      }
    };

    if (batch == 1) {
      run_one(pending[0]);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(batch);
      for (int k = 0; k < batch; ++k) pool.emplace_back([&, k] { run_one(pending[k]); });
      for (auto& th : pool) th.join();
    }
    for (Trial& t : pending) res.history.push_back(std::move(t));
    done += batch;
  }

  const Trial* best = nullptr;
  for (const Trial& t : res.history)
    if (!t.failed && (!best || t.rmse < best->rmse)) best = &t;
  if (!best) fail(ErrorCode::AllTrialsFailed, "no trial completed");
  res.best = *best;
  return res;
}

namespace {

std::string params_keyvals(const HyperParams& hp) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "H=%d L=%d D_init=%d D_all=%d E_init=%d E_all=%d B=%d eta_init=%.10g "
                "eta_all=%.10g lw_init=%.10g lw_all=%.10g l1_init=%.10g l1_all=%.10g "
                "alpha=%.10g use_ols=%d c_grad=%.10g p_drop=%.10g",
                hp.hidden, hp.seq_len, hp.d_init, hp.d_all, hp.epochs_init, hp.epochs_all,
                hp.batch, hp.lr_init, hp.lr_all, hp.wd_init, hp.wd_all, hp.l1_init, hp.l1_all,
                hp.ols_scale, hp.use_ols ? 1 : 0, hp.clip, hp.dropout);
  return buf;
}

}  // namespace

void write_history_csv(const std::string& path, const std::vector<Trial>& history) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ParseError, "cannot write '" + path + "'");
  out << "trial_id,params,rmse,status,seed\n";
  char num[48];
  for (const Trial& t : history) {
    out << t.id << ',' << params_keyvals(t.params) << ',';
    if (!t.failed) {
      std::snprintf(num, sizeof(num), "%.10g", t.rmse);
      out << num;
    }
    out << ',' << (t.failed ? "failed" : "complete") << ',' << t.seed << '\n';
  }
}

void write_best_params(const std::string& path, const Trial& best, model::Arch arch,
                       std::uint64_t seed) {
  nlohmann::json j;
  j["format"] = "epf-params";
  j["version"] = 1;
  j["arch"] = model::to_string(arch);
  j["search_seed"] = seed;
  j["trial_id"] = best.id;
  j["rmse"] = best.rmse;
  const HyperParams& hp = best.params;
  j["params"] = {{"H", hp.hidden},         {"L", hp.seq_len},       {"D_init", hp.d_init},
                 {"D_all", hp.d_all},      {"E_init", hp.epochs_init},
                 {"E_all", hp.epochs_all}, {"B", hp.batch},         {"eta_init", hp.lr_init},
                 {"eta_all", hp.lr_all},   {"lw_init", hp.wd_init}, {"lw_all", hp.wd_all},
                 {"l1_init", hp.l1_init},  {"l1_all", hp.l1_all},   {"alpha", hp.ols_scale},
                 {"use_ols", hp.use_ols},  {"c_grad", hp.clip},     {"p_drop", hp.dropout}};
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ParseError, "cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

std::pair<HyperParams, model::Arch> read_best_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(ErrorCode::ParseError, std::string("bad params file: ") + e.what());
  }
  if (j.value("format", "") != "epf-params")
    fail(ErrorCode::ParseError, "not an epf params file: " + path);
  const nlohmann::json& p = j.at("params");
  HyperParams hp;
  hp.hidden = p.at("H").get<int>();
  hp.seq_len = p.at("L").get<int>();
  hp.d_init = p.at("D_init").get<int>();
  hp.d_all = p.at("D_all").get<int>();
  hp.epochs_init = p.at("E_init").get<int>();
  hp.epochs_all = p.at("E_all").get<int>();
  hp.batch = p.at("B").get<int>();
  hp.lr_init = p.at("eta_init").get<double>();
  hp.lr_all = p.at("eta_all").get<double>();
  hp.wd_init = p.at("lw_init").get<double>();
  hp.wd_all = p.at("lw_all").get<double>();
  hp.l1_init = p.at("l1_init").get<double>();
  hp.l1_all = p.at("l1_all").get<double>();
  hp.ols_scale = p.at("alpha").get<double>();
  hp.use_ols = p.at("use_ols").get<bool>();
  hp.clip = p.at("c_grad").get<double>();
  hp.dropout = p.at("p_drop").get<double>();
  return {hp, model::arch_from_string(j.at("arch").get<std::string>())};
}

}  // namespace epf::hpo
