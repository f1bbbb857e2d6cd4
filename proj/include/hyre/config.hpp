#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hyre/active.hpp"
#include "hyre/belief.hpp"
#include "hyre/ensemble.hpp"
#include "hyre/tasks.hpp"

namespace hyre::bench {

// Flat `key = value` text config with '#' comments. Unknown keys are rejected
// when building an ExperimentConfig so typos fail loudly.
class KeyValueConfig {
 public:
  static KeyValueConfig from_string(const std::string& text);
  static KeyValueConfig from_file(const std::string& path);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  double get_real(const std::string& key, double fallback) const;
  std::size_t get_count(const std::string& key, std::size_t fallback) const;
  bool get_flag(const std::string& key, bool fallback) const;
  std::vector<std::size_t> get_count_list(const std::string& key,
                                          std::vector<std::size_t> fallback) const;
  std::vector<std::uint64_t> get_seed_list(const std::string& key,
                                           std::vector<std::uint64_t> fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

struct TaskSpec {
  std::string kind;  // gp | conflicting | hypercube | uci

  // uci
  std::string path;
  std::string schema_path;
  tasks::SplitSpec split;

  // gp
  tasks::GpSpec gp;
  std::size_t gp_train_n = 7;
  std::size_t gp_test_n = 1000;

  // conflicting
  std::size_t n_labelers = 10;
  std::size_t n_points = 512;

  // synthetic pool / eval sizes
  std::size_t pool_n = 256;
  std::size_t eval_n = 2048;

  // hypercube
  std::size_t hc_train_n = 256;
};

struct AdaptationConfig {
  std::vector<std::size_t> budgets = {0, 1, 2, 4, 8, 16, 32};
  active::Criterion criterion = active::Criterion::random_pick;
  LossKind loss = LossKind::zero_one;
};

struct ExperimentConfig {
  std::string name = "experiment";
  TaskSpec task;
  EnsembleConfig ensemble;  // input_dim filled from the task data
  TrainConfig train;
  AdaptationConfig adapt;
  bool run_finetune = false;
  std::size_t finetune_steps = 200;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string out_dir = "runs/out";

  void validate() const;  // throws invalid_argument on bad combinations
};

ExperimentConfig experiment_config_from_kv(const KeyValueConfig& kv);
ExperimentConfig load_experiment_config(const std::string& path);

// Canonical serialization; equal configs serialize identically.
std::string canonical_config(const ExperimentConfig& config);

// FNV-1a 64-bit over the canonical serialization, as a hex string.
std::string config_hash(const ExperimentConfig& config);

}  // namespace hyre::bench
