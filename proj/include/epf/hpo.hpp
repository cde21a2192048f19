#pragma once

#include <map>
#include <string>
#include <vector>

#include "epf/features.hpp"
#include "epf/model.hpp"
#include "epf/rng.hpp"
#include "epf/train.hpp"

namespace epf::hpo {

// One point of the tunable configuration space.
struct HyperParams {
  int hidden = 32;
  int seq_len = 1;
  int d_init = 365;
  int d_all = 90;
  int epochs_init = 50;
  int epochs_all = 10;
  int batch = 32;
  double lr_init = 1e-3;
  double lr_all = 1e-3;
  double wd_init = 1e-5;
  double wd_all = 1e-5;
  double l1_init = 1e-5;
  double l1_all = 1e-5;
  double ols_scale = 1.0;
  bool use_ols = true;
  double clip = 5.0;
  double dropout = 0.0;
};

// Forces dimensions the architecture cannot see to canonical values, so
// they can never influence the objective.
HyperParams masked(HyperParams hp, model::Arch arch);

model::ModelSpec to_model_spec(const HyperParams& hp, model::Arch arch,
                               const data::FeatureSets& fs);
train::TrainConfig to_train_config(const HyperParams& hp);

struct Domain {
  enum class Kind { int_range, real_uniform, real_log, int_choice, boolean };
  Kind kind = Kind::real_uniform;
  double lo = 0.0, hi = 1.0;          // ranges (inclusive)
  std::vector<int> choices;           // int_choice

  static Domain int_range(int lo, int hi);
  static Domain real_uniform(double lo, double hi);
  static Domain real_log(double lo, double hi);
  static Domain int_choice(std::vector<int> choices);
  static Domain boolean();
};

struct SearchSpace {
  // insertion-ordered spec of every tunable dimension
  std::vector<std::pair<std::string, Domain>> dims;

  const Domain& at(const std::string& name) const;
  // The full table of tunable ranges used by the study.
  static SearchSpace defaults();
  // defaults() with the window dimensions capped so every trial fits the
  // available history.
  static SearchSpace defaults_capped(int max_d_init, int max_d_all);
};

struct Trial {
  int id = 0;
  HyperParams params;
  double rmse = 0.0;
  bool failed = false;
  std::uint64_t seed = 0;
};

enum class SamplerKind { random, tpe };
SamplerKind sampler_from_string(const std::string& s);
std::string to_string(SamplerKind s);

// Draws one configuration. The random sampler ignores history; TPE needs at
// least 10 complete trials before it starts exploiting, and then samples 24
// candidates per dimension from a KDE of the good split (gamma = 0.25),
// keeping the best good/bad density ratio.
HyperParams sample(const SearchSpace& space, const std::vector<Trial>& history, Rng& rng,
                   SamplerKind sampler, model::Arch arch);

// Rolling validation RMSE (EUR/MWh) of one configuration over samples
// [val_begin, val_end). The validation plan mirrors the test plan; it is
// warm-started unless the caller opts out. Throws TrialFailed when training
// cannot run.
double objective(const HyperParams& hp, const data::FeatureSets& fs, model::Arch arch,
                 int val_begin, int val_end, std::uint64_t seed, bool warm_start = true);

struct OptimizeResult {
  Trial best;
  std::vector<Trial> history;
};

// Runs `budget` trials; failed trials are recorded and skipped. Workers > 1
// evaluates trials in deterministic synchronized batches.
OptimizeResult optimize(const SearchSpace& space, int budget, SamplerKind sampler,
                        const data::FeatureSets& fs, model::Arch arch, int val_begin, int val_end,
                        std::uint64_t seed, int workers = 1);

void write_history_csv(const std::string& path, const std::vector<Trial>& history);
void write_best_params(const std::string& path, const Trial& best, model::Arch arch,
                       std::uint64_t seed);
// Returns (params, arch) recorded by write_best_params.
std::pair<HyperParams, model::Arch> read_best_params(const std::string& path);

}  // namespace epf::hpo
