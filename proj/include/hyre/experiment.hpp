#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyre/active.hpp"
#include "hyre/belief.hpp"
#include "hyre/config.hpp"
#include "hyre/dataset.hpp"
#include "hyre/ensemble.hpp"

namespace hyre::bench {

enum class Metric { rmse, accuracy };

const char* metric_name(Metric m);
bool lower_is_better(Metric m);

double rmse(std::span<const double> predictions, std::span<const double> targets);
// probabilities thresholded at 0.5; a prediction exactly on the threshold
// counts as an error
double accuracy_from_probabilities(std::span<const double> probabilities,
                                   std::span<const double> targets);

// Everything one seed of an experiment needs: training data, an adaptation
// pool with hidden labels, and a labeled evaluation set.
struct PreparedTask {
  Dataset train;
  nn::Matrix pool_inputs;
  std::vector<double> pool_labels;
  nn::Matrix eval_inputs;
  std::vector<double> eval_targets;
  Metric metric = Metric::rmse;

  Dataset labeled_eval() const;  // eval set as a Dataset (for best_head)
};

PreparedTask prepare_task(const TaskSpec& spec, std::uint64_t data_seed);

// 's score on the prepared task's eval set under a belief. Regression
// combines raw outputs; classification combines probabilities.
double weighted_score(const EnsembleModel& model, const BeliefState& belief,
                      const PreparedTask& task);

// Single head's score on the eval set.
double head_score(const EnsembleModel& model, std::size_t head,
                  const PreparedTask& task);

// Clones the model, appends the adaptation data to the training set, runs
// `steps` gradient updates on the clone's learnable parameters, and scores the
// clone's uniform prediction on the eval set. The original model is untouched.
double finetune_baseline(const EnsembleModel& model, const Dataset& train_data,
                         const Dataset& adapt_data, const TrainConfig& tc,
                         std::size_t steps, const PreparedTask& task,
                         std::uint64_t seed);

struct SeedResult {
  std::uint64_t seed = 0;
  double uniform_score = 0.0;
  double best_head_score = 0.0;
  std::size_t best_head_index = 0;
  std::vector<double> hyre_scores;      // parallel to budgets
  std::vector<double> finetune_scores;  // parallel to budgets; empty if disabled
  double final_train_loss = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample std, 0 for a single seed
};

Aggregate aggregate(std::span<const double> values);

struct RunReport {
  std::string config_digest;
  std::string metric;
  std::vector<std::size_t> budgets;
  std::vector<SeedResult> seeds;
  double wall_seconds = 0.0;

  Aggregate uniform;
  Aggregate best_head;
  std::vector<Aggregate> hyre;      // per budget
  std::vector<Aggregate> finetune;  // per budget; empty if disabled
};

// Full protocol per seed: generate/load -> split -> train -> evaluate uniform,
// adaptation at every budget point, best-head oracle, optional fine-tuning.
// Deterministic per (config, seed); seeds run in parallel workers.
RunReport run_experiment(const ExperimentConfig& config);

// Writes metrics.csv, aggregate.json, and plot-data CSVs into dir.
void emit_report(const RunReport& report, const ExperimentConfig& config,
                 const std::string& dir);

struct MetricsRow {
  std::uint64_t seed;
  std::size_t budget;
  double uniform;
  double hyre;
  double best_head;
  bool has_finetune;
  double finetune;
};

std::vector<MetricsRow> parse_metrics_csv(const std::string& path);

}  // namespace hyre::bench
