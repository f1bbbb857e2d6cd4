// Command-line front end: config-driven training, adaptation, benchmarking,
// PCA export, and report re-aggregation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hyre/active.hpp"
#include "hyre/belief.hpp"
#include "hyre/checkpoint.hpp"
#include "hyre/config.hpp"
#include "hyre/ensemble.hpp"
#include "hyre/errors.hpp"
#include "hyre/experiment.hpp"
#include "hyre/function_pca.hpp"
#include "hyre/rng.hpp"
#include "hyre/tasks.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitDataError = 3;
constexpr int kExitNumericError = 4;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string budgets;
  std::string criterion;
};

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw hyre::io_error("cannot open for writing: " + path);
  out << content;
}

hyre::bench::ExperimentConfig load_config(const CommonArgs& args) {
  auto config = hyre::bench::load_experiment_config(args.config_path);
  if (args.seed) config.seeds = {*args.seed};
  if (!args.out_dir.empty()) config.out_dir = args.out_dir;
  if (!args.budgets.empty()) {
    auto kv = hyre::bench::KeyValueConfig::from_string("adapt.budgets = " + args.budgets);
    config.adapt.budgets = kv.get_count_list("adapt.budgets", {});
  }
  if (!args.criterion.empty()) {
    config.adapt.criterion = hyre::active::parse_criterion(args.criterion);
  }
  config.validate();
  return config;
}

// sub-seed derivation shared with run_experiment
struct SeedPlan {
  std::uint64_t data, model, train, criterion;
};

SeedPlan plan_seeds(std::uint64_t seed) {
  const hyre::Rng root(seed);
  return {root.split(1).next_u64(), root.split(2).next_u64(),
          root.split(3).next_u64(), root.split(4).next_u64()};
}

int cmd_train(const CommonArgs& args) {
  const auto config = load_config(args);
  const std::uint64_t seed = config.seeds.front();
  const SeedPlan plan = plan_seeds(seed);

  auto task = hyre::bench::prepare_task(config.task, plan.data);
  hyre::EnsembleConfig ens = config.ensemble;
  ens.input_dim = task.train.feature_dim();
  ens.seed = plan.model;
  auto model = hyre::build_ensemble(ens);
  hyre::TrainConfig tc = config.train;
  tc.seed = plan.train;
  const auto history = hyre::train_ensemble(model, task.train, tc);

  std::filesystem::create_directories(config.out_dir);
  const std::string ckpt = config.out_dir + "/model.ckpt";
  hyre::bench::checkpoint_save(model, nullptr, ckpt);

  std::ostringstream hist;
  hist.precision(17);
  hist << "step,mean_loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) hist << i << "," << history[i] << "\n";
  write_text(config.out_dir + "/train_loss.csv", hist.str());

  std::cout << "trained " << hyre::architecture_name(ens.arch) << " ensemble (K="
            << ens.heads << ") for " << history.size() << " steps";
  if (!history.empty()) std::cout << ", final mean loss " << history.back();
  std::cout << "\ncheckpoint: " << ckpt << "\n";
  std::cout << "config_hash: " << hyre::bench::config_hash(config) << "\n";
  return kExitOk;
}

int cmd_adapt(const CommonArgs& args, const std::string& checkpoint_path) {
  const auto config = load_config(args);
  const std::uint64_t seed = config.seeds.front();
  const SeedPlan plan = plan_seeds(seed);

  auto task = hyre::bench::prepare_task(config.task, plan.data);
  auto ck = hyre::bench::checkpoint_load(checkpoint_path);

  const std::size_t budget =
      *std::max_element(config.adapt.budgets.begin(), config.adapt.budgets.end());
  hyre::active::Pool pool(task.pool_inputs, task.pool_labels, budget);
  const hyre::active::QueryCriterion criterion{config.adapt.criterion, plan.criterion};
  const hyre::PointLoss loss{config.adapt.loss};
  const auto result = hyre::active::run_adaptation(ck.model, pool, budget, criterion, loss);

  std::filesystem::create_directories(config.out_dir);
  write_text(config.out_dir + "/query_log.csv", hyre::active::query_log_csv(result.log));
  write_text(config.out_dir + "/belief.txt", hyre::serialize_belief(result.belief));
  hyre::bench::checkpoint_save(ck.model, &result.belief, config.out_dir + "/adapted.ckpt");

  const double score = hyre::bench::weighted_score(ck.model, result.belief, task);
  const double uniform =
      hyre::bench::weighted_score(ck.model, hyre::init_belief(ck.model.config.heads), task);
  std::cout << "adapted with budget " << budget << " ("
            << hyre::active::criterion_name(criterion.kind) << ")\n";
  std::cout << hyre::bench::metric_name(task.metric) << ": uniform " << uniform
            << " -> hyre " << score << "\n";
  std::cout << "query log: " << config.out_dir << "/query_log.csv\n";
  return kExitOk;
}

int cmd_bench(const CommonArgs& args) {
  const auto config = load_config(args);
  const auto report = hyre::bench::run_experiment(config);
  hyre::bench::emit_report(report, config, config.out_dir);

  std::cout << "task " << config.task.kind << " ("
            << hyre::architecture_name(config.ensemble.arch) << ", K="
            << config.ensemble.heads << "), metric " << report.metric << "\n";
  std::cout << "uniform: " << report.uniform.mean << " +- " << report.uniform.stddev
            << "\n";
  std::cout << "best head: " << report.best_head.mean << " +- "
            << report.best_head.stddev << "\n";
  for (std::size_t i = 0; i < report.budgets.size(); ++i) {
    std::cout << "hyre @ B=" << report.budgets[i] << ": " << report.hyre[i].mean
              << " +- " << report.hyre[i].stddev;
    if (!report.finetune.empty()) {
      std::cout << "   finetune: " << report.finetune[i].mean << " +- "
                << report.finetune[i].stddev;
    }
    std::cout << "\n";
  }
  std::cout << "report written to " << config.out_dir << " (config_hash "
            << report.config_digest << ")\n";
  return kExitOk;
}

int cmd_analyze(const CommonArgs& args, const std::string& checkpoint_path,
                std::size_t components) {
  const auto config = load_config(args);
  const SeedPlan plan = plan_seeds(config.seeds.front());
  auto task = hyre::bench::prepare_task(config.task, plan.data);
  auto ck = hyre::bench::checkpoint_load(checkpoint_path);

  hyre::nn::Matrix preds = hyre::ensemble_forward(ck.model, task.eval_inputs);
  if (task.metric == hyre::bench::Metric::accuracy) {
    for (auto& v : preds.data) {
      v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
  }
  auto pm = hyre::pca::make_prediction_matrix(std::move(preds));
  const std::size_t p = std::min(components, std::min(pm.heads(), pm.inputs()));
  const auto summary = hyre::pca::analyze_predictions(pm, p);

  std::vector<std::string> ids(task.eval_inputs.rows);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (task.eval_inputs.cols == 1) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6g", task.eval_inputs.at(i, 0));
      ids[i] = buf;
    } else {
      ids[i] = std::to_string(i);
    }
  }
  std::filesystem::create_directories(config.out_dir);
  write_text(config.out_dir + "/pca.csv", hyre::pca::pca_summary_csv(summary, ids));
  std::cout << "pca with " << p << " components; explained variance ratios:";
  for (double r : hyre::pca::explained_variance_ratio(summary)) std::cout << " " << r;
  std::cout << "\nwritten to " << config.out_dir << "/pca.csv\n";
  return kExitOk;
}

int cmd_report(const std::string& metrics_path) {
  const auto rows = hyre::bench::parse_metrics_csv(metrics_path);
  std::map<std::size_t, std::vector<double>> by_budget;
  std::map<std::uint64_t, double> uniform_by_seed;
  for (const auto& row : rows) {
    by_budget[row.budget].push_back(row.hyre);
    uniform_by_seed[row.seed] = row.uniform;
  }
  std::vector<double> uniforms;
  for (const auto& [seed, u] : uniform_by_seed) {
    (void)seed;
    uniforms.push_back(u);
  }
  const auto agg_u = hyre::bench::aggregate(uniforms);
  std::cout << "seeds: " << uniforms.size() << "\n";
  std::cout << "uniform: " << agg_u.mean << " +- " << agg_u.stddev << "\n";
  for (const auto& [budget, vals] : by_budget) {
    const auto agg = hyre::bench::aggregate(vals);
    std::cout << "hyre @ B=" << budget << ": " << agg.mean << " +- " << agg.stddev
              << "  (n=" << vals.size() << ")\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diverse-ensemble test-time reweighting bench"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string checkpoint_path;
  std::string metrics_path;
  std::size_t components = 3;

  auto add_common = [&](CLI::App* cmd, bool need_config = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "experiment config file");
    if (need_config) opt->required();
    cmd->add_option("--seed", args.seed, "override the config seeds with one seed");
    cmd->add_option("--out", args.out_dir, "output directory override");
    cmd->add_option("--budget", args.budgets, "comma-separated budget list override");
    cmd->add_option("--criterion", args.criterion,
                    "query criterion override (entropy|bald|variance|random)");
  };

  auto* train = app.add_subcommand("train", "train an ensemble and checkpoint it");
  add_common(train);
  auto* adapt = app.add_subcommand("adapt", "run test-time reweighting from a checkpoint");
  add_common(adapt);
  adapt->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  auto* bench = app.add_subcommand("bench", "full multi-seed benchmark with reports");
  add_common(bench);
  auto* analyze = app.add_subcommand("analyze", "function-space PCA export");
  add_common(analyze);
  analyze->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  analyze->add_option("--components", components, "number of principal components");
  auto* report = app.add_subcommand("report", "re-aggregate an emitted metrics.csv");
  report->add_option("--in", metrics_path, "metrics.csv path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(args);
    if (adapt->parsed()) return cmd_adapt(args, checkpoint_path);
    if (bench->parsed()) return cmd_bench(args);
    if (analyze->parsed()) return cmd_analyze(args, checkpoint_path, components);
    if (report->parsed()) return cmd_report(metrics_path);
  } catch (const hyre::numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumericError;
  } catch (const hyre::format_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const hyre::io_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const hyre::budget_exhausted& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
