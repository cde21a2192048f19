#include "epf/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "epf/error.hpp"

namespace epf::cli {

using nlohmann::json;

namespace {

json config_to_json(const RunConfig& c) {
  json j;
  j["data"] = c.data_path;
  j["out_dir"] = c.out_dir;
  j["seed"] = c.seed;
  j["arch"] = c.arch;
  j["features"] = {{"merge_wind", c.features.merge_wind},
                   {"fuel_lags", c.features.fuel_lags},
                   {"scalar_target_standardization", c.features.scalar_target_standardization}};
  j["split"] = {{"train_days", c.split.train_days},
                {"val_days", c.split.val_days},
                {"test_days", c.split.test_days}};
  const hpo::HyperParams& hp = c.params;
  j["params"] = {{"H", hp.hidden},         {"L", hp.seq_len},          {"D_init", hp.d_init},
                 {"D_all", hp.d_all},      {"E_init", hp.epochs_init}, {"E_all", hp.epochs_all},
                 {"B", hp.batch},          {"eta_init", hp.lr_init},   {"eta_all", hp.lr_all},
                 {"lw_init", hp.wd_init},  {"lw_all", hp.wd_all},      {"l1_init", hp.l1_init},
                 {"l1_all", hp.l1_all},    {"alpha", hp.ols_scale},    {"use_ols", hp.use_ols},
                 {"c_grad", hp.clip},      {"p_drop", hp.dropout}};
  j["tune"] = {{"budget", c.tune.budget},
               {"sampler", c.tune.sampler},
               {"workers", c.tune.workers}};
  j["synth"] = {{"scenario", c.synth.scenario},
                {"days", c.synth.days},
                {"noise_std", c.synth.noise_std},
                {"spike_prob", c.synth.spike_prob},
                {"start_date", c.synth.start_date}};
  return j;
}

template <typename T>
void maybe(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail(ErrorCode::ParseError, std::string("bad config: ") + e.what());
  }

  RunConfig c;
  maybe(j, "data", c.data_path);
  maybe(j, "out_dir", c.out_dir);
  maybe(j, "seed", c.seed);
  maybe(j, "arch", c.arch);
  if (j.contains("features")) {
    const json& f = j["features"];
    maybe(f, "merge_wind", c.features.merge_wind);
    maybe(f, "fuel_lags", c.features.fuel_lags);
    maybe(f, "scalar_target_standardization", c.features.scalar_target_standardization);
  }
  if (j.contains("split")) {
    const json& s = j["split"];
    maybe(s, "train_days", c.split.train_days);
    maybe(s, "val_days", c.split.val_days);
    maybe(s, "test_days", c.split.test_days);
  }
  if (j.contains("params")) {
    const json& p = j["params"];
    maybe(p, "H", c.params.hidden);
    maybe(p, "L", c.params.seq_len);
    maybe(p, "D_init", c.params.d_init);
    maybe(p, "D_all", c.params.d_all);
    maybe(p, "E_init", c.params.epochs_init);
    maybe(p, "E_all", c.params.epochs_all);
    maybe(p, "B", c.params.batch);
    maybe(p, "eta_init", c.params.lr_init);
    maybe(p, "eta_all", c.params.lr_all);
    maybe(p, "lw_init", c.params.wd_init);
    maybe(p, "lw_all", c.params.wd_all);
    maybe(p, "l1_init", c.params.l1_init);
    maybe(p, "l1_all", c.params.l1_all);
    maybe(p, "alpha", c.params.ols_scale);
    maybe(p, "use_ols", c.params.use_ols);
    maybe(p, "c_grad", c.params.clip);
    maybe(p, "p_drop", c.params.dropout);
  }
  if (j.contains("tune")) {
    const json& t = j["tune"];
    maybe(t, "budget", c.tune.budget);
    maybe(t, "sampler", c.tune.sampler);
    maybe(t, "workers", c.tune.workers);
  }
  if (j.contains("synth")) {
    const json& s = j["synth"];
    maybe(s, "scenario", c.synth.scenario);
    maybe(s, "days", c.synth.days);
    maybe(s, "noise_std", c.synth.noise_std);
    maybe(s, "spike_prob", c.synth.spike_prob);
    maybe(s, "start_date", c.synth.start_date);
  }
  return c;
}

std::string run_config_json(const RunConfig& cfg) { return config_to_json(cfg).dump(); }

std::uint64_t fnv1a(const void* data, std::size_t len) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::ParseError, "cannot open '" + path + "' for hashing");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return hash_hex(fnv1a(bytes.data(), bytes.size()));
}

std::string config_hash(const RunConfig& cfg) {
  const std::string s = run_config_json(cfg);
  return hash_hex(fnv1a(s.data(), s.size()));
}

void write_manifest(const std::string& path, const Manifest& m) {
  json j;
  j["command"] = m.command;
  j["version"] = m.version;
  j["seed"] = m.seed;
  j["config_hash"] = m.config_hash;
  j["data_hash"] = m.data_hash;
  json outs = json::array();
  for (const auto& e : m.outputs)
    outs.push_back({{"path", e.path}, {"bytes", e.bytes}, {"hash", e.hash}});
  j["outputs"] = outs;
  std::ofstream out(path);
  if (!out) fail(ErrorCode::ParseError, "cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

}  // namespace epf::cli
