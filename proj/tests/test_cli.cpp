#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "epf/config.hpp"
#include "test_util.hpp"

using namespace epf;
namespace fs = std::filesystem;

namespace {

// The CLI binary sits next to the test tree in the build directory; the
// environment variable wins when set.
std::string cli_path() {
  if (const char* env = std::getenv("EPF_CLI")) return env;
  const fs::path rel = fs::path("..") / "tools" / "epf";
  if (fs::exists(rel)) return fs::absolute(rel).string();
  return "";
}

int run(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

int exit_code(int system_status) { return WEXITSTATUS(system_status); }

}  // namespace

TEST_CASE("fnv1a known vectors") {
  CHECK(cli::fnv1a("", 0) == 0xCBF29CE484222325ULL);
  const char* a = "a";
  CHECK(cli::fnv1a(a, 1) == 0xAF63DC4C8601EC8CULL);
  CHECK(cli::hash_hex(0xAF63DC4C8601EC8CULL) == "af63dc4c8601ec8c");
}

TEST_CASE("run config loads partial json and hashes stably") {
  TempDir tmp("cfg");
  write_file(tmp.file("c.json"), R"({
    "seed": 7,
    "arch": "kf-rnn",
    "params": {"H": 12, "eta_init": 0.0005},
    "split": {"val_days": 30, "test_days": 20},
    "synth": {"scenario": "linear", "days": 120}
  })");
  const cli::RunConfig c = cli::load_run_config(tmp.file("c.json"));
  CHECK(c.seed == 7);
  CHECK(c.arch == "kf-rnn");
  CHECK(c.params.hidden == 12);
  CHECK(c.params.lr_init == 0.0005);
  CHECK(c.params.seq_len == 1);  // untouched default
  CHECK(c.split.val_days == 30);
  CHECK(c.synth.scenario == "linear");

  const std::string h1 = cli::config_hash(c);
  CHECK(h1 == cli::config_hash(c));
  cli::RunConfig d = c;
  d.seed = 8;
  CHECK(cli::config_hash(d) != h1);
}

TEST_CASE("file hashing and manifests") {
  TempDir tmp("hash");
  write_file(tmp.file("x.bin"), "hello");
  write_file(tmp.file("y.bin"), "hello");
  write_file(tmp.file("z.bin"), "other");
  CHECK(cli::file_hash(tmp.file("x.bin")) == cli::file_hash(tmp.file("y.bin")));
  CHECK(cli::file_hash(tmp.file("x.bin")) != cli::file_hash(tmp.file("z.bin")));

  cli::Manifest m;
  m.command = "backtest";
  m.seed = 42;
  m.config_hash = "aaaa";
  m.data_hash = "bbbb";
  m.outputs.push_back({"forecast.csv", 123, "cccc"});
  cli::write_manifest(tmp.file("m.json"), m);
  const auto j = nlohmann::json::parse(read_file(tmp.file("m.json")));
  CHECK(j.at("command") == "backtest");
  CHECK(j.at("seed") == 42);
  CHECK(j.at("version") == std::string(cli::kVersion));
  CHECK(j.at("outputs").size() == 1);
  CHECK(j.at("outputs")[0].at("hash") == "cccc");
}

TEST_CASE("cli pipeline end to end") {
  const std::string cli = cli_path();
  REQUIRE_MESSAGE(!cli.empty(), "epf binary not found; set EPF_CLI");
  TempDir tmp("pipeline");
  const std::string out = tmp.file("out");
  const std::string base = cli + " --seed 11 --out-dir " + out + " ";

  // synth -> prepare -> backtest -> evaluate -> decompose
  CHECK(exit_code(run(base + "synth --scenario linear --days 90 --out " + tmp.file("d.csv"))) ==
        0);
  CHECK(exit_code(run(base + "prepare --data " + tmp.file("d.csv") + " --cache " +
                      tmp.file("cache.json"))) == 0);

  TempDir cfgdir("cfgp");
  write_file(cfgdir.file("p.json"), R"({
    "format": "epf-params", "version": 1, "arch": "lem", "search_seed": 0, "trial_id": 0,
    "rmse": 0, "params": {"H": 1, "L": 1, "D_init": 45, "D_all": 40, "E_init": 10, "E_all": 5,
    "B": 16, "eta_init": 0.001, "eta_all": 0.001, "lw_init": 1e-7, "lw_all": 1e-7,
    "l1_init": 1e-6, "l1_all": 1e-6, "alpha": 1.0, "use_ols": true, "c_grad": 5.0,
    "p_drop": 0.0}
  })");
  CHECK(exit_code(run(base + "backtest --cache " + tmp.file("cache.json") + " --params " +
                      cfgdir.file("p.json") + " --test-days 12 --out " + tmp.file("fc.csv") +
                      " --save-model " + tmp.file("model.json"))) == 0);
  CHECK(fs::exists(tmp.file("fc.csv")));
  CHECK(fs::exists(tmp.file("model.json")));
  CHECK(fs::exists(out + "/manifest_backtest.json"));

  CHECK(exit_code(run(base + "evaluate --cache " + tmp.file("cache.json") + " --forecast lem=" +
                      tmp.file("fc.csv"))) == 0);
  CHECK(fs::exists(out + "/metrics.csv"));
  CHECK(fs::exists(out + "/gw_matrix.csv"));
  const std::string metrics = read_file(out + "/metrics.csv");
  CHECK(metrics.find("model,rmse,mae,rmae") != std::string::npos);
  CHECK(metrics.find("weekly-naive") != std::string::npos);

  CHECK(exit_code(run(base + "decompose --forecast " + tmp.file("fc.csv"))) == 0);
  CHECK(fs::exists(out + "/decompose_daily.csv"));
  const std::string daily = read_file(out + "/decompose_daily.csv");
  CHECK(daily.find("date,actual,combined,lem_component,rnn_component,kf_component") !=
        std::string::npos);

  // single-branch model: the component column equals the combined column
  {
    std::istringstream in(daily);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> f;
      std::string cur;
      for (char c : line) {
        if (c == ',') {
          f.push_back(cur);
          cur.clear();
        } else {
          cur += c;
        }
      }
      f.push_back(cur);
      REQUIRE(f.size() == 6);
      CHECK(f[2] == f[3]);  // combined == lem component
      CHECK(f[4].empty());
      CHECK(f[5].empty());
    }
  }

  // byte-identical rerun
  TempDir tmp2("pipeline2");
  const std::string base2 = cli + " --seed 11 --out-dir " + tmp2.file("o") + " ";
  CHECK(exit_code(run(base2 + "synth --scenario linear --days 90 --out " + tmp2.file("d.csv"))) ==
        0);
  CHECK(read_file(tmp2.file("d.csv")) == read_file(tmp.file("d.csv")));
}

TEST_CASE("cli exit codes for bad input") {
  const std::string cli = cli_path();
  REQUIRE_MESSAGE(!cli.empty(), "epf binary not found; set EPF_CLI");
  TempDir tmp("badcsv");
  const std::string base = cli + " --out-dir " + tmp.file("o") + " ";

  write_file(tmp.file("bad.csv"),
             "timestamp,price,load_fc,wind_onshore_fc,wind_offshore_fc,solar_fc,coal,gas,oil,eua\n"
             "2021-01-04T00:00+00:00,oops,1,1,1,1,1,1,1,1\n");
  CHECK(exit_code(run(base + "prepare --data " + tmp.file("bad.csv") + " --cache " +
                      tmp.file("c.json"))) == 2);

  // insufficient history: windows larger than the data
  CHECK(exit_code(run(base + "synth --scenario linear --days 60 --out " + tmp.file("d.csv"))) ==
        0);
  CHECK(exit_code(run(base + "prepare --data " + tmp.file("d.csv") + " --cache " +
                      tmp.file("c.json"))) == 0);
  TempDir cfgdir("cfgq");
  write_file(cfgdir.file("p.json"), R"({
    "format": "epf-params", "version": 1, "arch": "lem", "search_seed": 0, "trial_id": 0,
    "rmse": 0, "params": {"H": 1, "L": 1, "D_init": 400, "D_all": 40, "E_init": 10, "E_all": 5,
    "B": 16, "eta_init": 0.001, "eta_all": 0.001, "lw_init": 1e-7, "lw_all": 1e-7,
    "l1_init": 1e-6, "l1_all": 1e-6, "alpha": 1.0, "use_ols": true, "c_grad": 5.0,
    "p_drop": 0.0}
  })");
  CHECK(exit_code(run(base + "backtest --cache " + tmp.file("c.json") + " --params " +
                      cfgdir.file("p.json") + " --test-days 10 --out " + tmp.file("fc.csv"))) ==
        3);
}
