#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "epf/features.hpp"
#include "epf/hpo.hpp"
#include "epf/synth.hpp"

namespace epf::cli {

inline constexpr const char* kVersion = "0.1.0";

// Exit-code contract of the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitInsufficientHistory = 3;
inline constexpr int kExitTuningFailure = 4;
inline constexpr int kExitInternal = 5;

struct TuneSettings {
  int budget = 50;
  std::string sampler = "tpe";
  int workers = 0;  // 0 = hardware concurrency
};

struct SynthSettings {
  std::string scenario = "mixed";
  int days = 400;
  double noise_std = -1.0;
  double spike_prob = -1.0;
  std::string start_date = "2021-01-04";
};

struct SplitSettings {
  // -1 lets the remainder fill the slot (at most one -1).
  int train_days = -1;
  int val_days = 60;
  int test_days = 60;
};

// Everything a run needs; the CLI loads this from a JSON config file and
// lets flags override individual values.
struct RunConfig {
  std::string data_path;
  std::string out_dir = "out";
  std::uint64_t seed = 42;
  std::string arch = "lem-kf-rnn";
  data::FeatureConfig features;
  SplitSettings split;
  hpo::HyperParams params;
  TuneSettings tune;
  SynthSettings synth;
};

RunConfig load_run_config(const std::string& path);
std::string run_config_json(const RunConfig& cfg);  // canonical dump

std::uint64_t fnv1a(const void* data, std::size_t len);
std::string hash_hex(std::uint64_t h);
std::string file_hash(const std::string& path);
std::string config_hash(const RunConfig& cfg);

struct ManifestEntry {
  std::string path;
  std::uint64_t bytes = 0;
  std::string hash;
};

// Reproducibility record written next to every command's outputs.
struct Manifest {
  std::string command;
  std::string version = kVersion;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string data_hash;
  std::vector<ManifestEntry> outputs;
};

void write_manifest(const std::string& path, const Manifest& m);

}  // namespace epf::cli
