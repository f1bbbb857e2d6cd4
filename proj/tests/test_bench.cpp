// Bench plumbing: config parsing and hashing, checkpoint round trips, the
// experiment driver, and report emission.

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "hyre/checkpoint.hpp"
#include "hyre/config.hpp"
#include "hyre/errors.hpp"
#include "hyre/experiment.hpp"
#include "hyre/rng.hpp"

using namespace hyre;
using namespace hyre::bench;

namespace {

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& name) : path("/tmp/hyre_bench_" + name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

ExperimentConfig tiny_hypercube_config() {
  auto kv = KeyValueConfig::from_string(
      "task.kind = hypercube\n"
      "task.train_n = 64\n"
      "task.pool_n = 32\n"
      "task.eval_n = 128\n"
      "ensemble.heads = 8\n"
      "ensemble.architecture = shared_base\n"
      "ensemble.hidden = 16\n"
      "train.steps = 150\n"
      "train.batch = 32\n"
      "adapt.budgets = 0,2,4\n"
      "adapt.criterion = bald\n"
      "seeds = 1,2\n");
  return experiment_config_from_kv(kv);
}

}  // namespace

TEST_CASE("key-value config parsing and validation") {
  auto kv = KeyValueConfig::from_string(
      "# comment\n"
      "task.kind = gp   # trailing comment\n"
      "ensemble.heads = 12\n"
      "train.lr = 0.01\n"
      "seeds = 3,4,5\n");
  CHECK(kv.require("task.kind") == "gp");
  CHECK(kv.get_count("ensemble.heads", 0) == 12);
  CHECK(kv.get_real("train.lr", 0.0) == doctest::Approx(0.01));
  CHECK(kv.get_seed_list("seeds", {}) == std::vector<std::uint64_t>{3, 4, 5});
  CHECK_THROWS_AS(kv.require("missing.key"), std::invalid_argument);

  CHECK_THROWS_AS(KeyValueConfig::from_string("a = 1\na = 2\n"), format_error);
  CHECK_THROWS_AS(KeyValueConfig::from_string("not a pair\n"), format_error);

  // unknown keys are rejected when building an experiment config
  auto bad = KeyValueConfig::from_string("task.kind = gp\nenssemble.heads = 3\n");
  CHECK_THROWS_AS(experiment_config_from_kv(bad), std::invalid_argument);

  // incompatible criterion/task combinations fail validation
  auto mismatch = KeyValueConfig::from_string(
      "task.kind = gp\nadapt.criterion = bald\n");
  CHECK_THROWS_AS(experiment_config_from_kv(mismatch).validate(),
                  std::invalid_argument);
}

TEST_CASE("config hash is stable and sensitive") {
  const auto a = tiny_hypercube_config();
  auto b = a;
  CHECK(config_hash(a) == config_hash(b));
  b.ensemble.prior_scale = 2.0;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("checkpoint round trip preserves forward outputs bitwise") {
  for (const char* arch : {"vanilla", "shared_base", "epinet"}) {
    EnsembleConfig cfg;
    cfg.heads = 5;
    cfg.arch = parse_architecture(arch);
    cfg.input_dim = 3;
    cfg.hidden = {10};
    cfg.index_dim = 4;
    cfg.seed = 77;
    auto model = build_ensemble(cfg);

    Rng rng(5);
    nn::Matrix x(6, 3);
    for (auto& v : x.data) v = rng.normal();
    const auto before = ensemble_forward(model, x);

    BeliefState belief = init_belief(cfg.heads);
    belief.cumulative_losses = {0.5, 0.25, 0.125, 1.0, 2.0};

    TempDir dir(std::string("ckpt_") + arch);
    const std::string path = dir.path + "/model.ckpt";
    checkpoint_save(model, &belief, path);
    const auto loaded = checkpoint_load(path);
    const auto after = ensemble_forward(loaded.model, x);
    CHECK(before.data == after.data);
    REQUIRE(loaded.belief.has_value());
    CHECK(loaded.belief->cumulative_losses == belief.cumulative_losses);
  }
}

TEST_CASE("checkpoint rejects truncation and corruption") {
  EnsembleConfig cfg;
  cfg.heads = 3;
  cfg.arch = Architecture::shared_base;
  cfg.input_dim = 2;
  cfg.hidden = {6};
  auto model = build_ensemble(cfg);
  TempDir dir("ckpt_bad");
  const std::string path = dir.path + "/model.ckpt";
  checkpoint_save(model, nullptr, path);

  // truncate
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size / 2);
  CHECK_THROWS_AS(checkpoint_load(path), format_error);

  // bad magic
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTACKPTxxxxxxxxxxxxxxxxxxxx";
  }
  CHECK_THROWS_AS(checkpoint_load(path), format_error);
  CHECK_THROWS_AS(checkpoint_load(dir.path + "/nope.ckpt"), io_error);
}

TEST_CASE("run_experiment: budget zero equals uniform, determinism, reports") {
  auto config = tiny_hypercube_config();
  const auto report = run_experiment(config);

  REQUIRE(report.seeds.size() == 2);
  REQUIRE(report.budgets == std::vector<std::size_t>{0, 2, 4});
  for (const auto& seed : report.seeds) {
    // budget 0 leaves the belief uniform: scores match exactly
    CHECK(seed.hyre_scores[0] == seed.uniform_score);
    CHECK(seed.hyre_scores.size() == 3);
  }

  // two runs with identical config produce identical numbers
  const auto again = run_experiment(config);
  for (std::size_t i = 0; i < report.seeds.size(); ++i) {
    CHECK(report.seeds[i].uniform_score == again.seeds[i].uniform_score);
    CHECK(report.seeds[i].best_head_score == again.seeds[i].best_head_score);
    CHECK(report.seeds[i].hyre_scores == again.seeds[i].hyre_scores);
  }
  CHECK(report.config_digest == again.config_digest);

  TempDir dir("report");
  emit_report(report, config, dir.path);
  CHECK(std::filesystem::exists(dir.path + "/metrics.csv"));
  CHECK(std::filesystem::exists(dir.path + "/aggregate.json"));
  CHECK(std::filesystem::exists(dir.path + "/budget_curve.csv"));
  CHECK(std::filesystem::exists(dir.path + "/uniform_vs_best.csv"));

  // CSV row count = seeds x budgets, and parsing reproduces values exactly
  const auto rows = parse_metrics_csv(dir.path + "/metrics.csv");
  REQUIRE(rows.size() == 6);
  std::size_t idx = 0;
  for (const auto& seed : report.seeds) {
    for (std::size_t bi = 0; bi < report.budgets.size(); ++bi, ++idx) {
      CHECK(rows[idx].seed == seed.seed);
      CHECK(rows[idx].budget == report.budgets[bi]);
      CHECK(rows[idx].uniform == seed.uniform_score);
      CHECK(rows[idx].hyre == seed.hyre_scores[bi]);
      CHECK(rows[idx].best_head == seed.best_head_score);
      CHECK_FALSE(rows[idx].has_finetune);
    }
  }
}

TEST_CASE("finetune baseline: zero steps is a no-op and the original is untouched") {
  auto config = tiny_hypercube_config();
  config.seeds = {3};
  const auto task = prepare_task(config.task, 99);

  EnsembleConfig ens = config.ensemble;
  ens.input_dim = task.train.feature_dim();
  ens.seed = 5;
  auto model = build_ensemble(ens);
  TrainConfig tc = config.train;
  train_ensemble(model, task.train, tc);

  const auto before_learn = model.learn_net;
  const double uniform = weighted_score(model, init_belief(ens.heads), task);

  Dataset adapt;
  adapt.kind = TaskKind::binary;
  adapt.features = nn::Matrix(4, task.train.feature_dim());
  Rng rng(3);
  for (auto& v : adapt.features.data) v = rng.uniform(-1.0, 1.0);
  adapt.targets = {1.0, 0.0, 1.0, 0.0};

  const double no_steps = finetune_baseline(model, task.train, adapt, tc, 0, task, 1);
  CHECK(no_steps == uniform);

  const double tuned = finetune_baseline(model, task.train, adapt, tc, 50, task, 1);
  (void)tuned;
  CHECK(nn::byte_equal(model.learn_net, before_learn));  // clone contract
}

TEST_CASE("uci task plumbing end to end on a synthetic table") {
  TempDir dir("uci");
  // y = 2*a - b + noise-free linear relation, 40 rows
  std::ostringstream table;
  table << "a,b,y\n";
  Rng rng(12);
  for (int i = 0; i < 40; ++i) {
    const double a = rng.uniform(0.0, 10.0);
    const double b = rng.uniform(0.0, 10.0);
    table << a << "," << b << "," << (2.0 * a - b) << "\n";
  }
  const std::string data_path = dir.path + "/table.csv";
  {
    std::ofstream out(data_path);
    out << table.str();
  }
  const std::string schema_path = dir.path + "/table.schema";
  {
    std::ofstream out(schema_path);
    out << "delimiter = comma\nheader = true\ntarget = y\n";
  }

  auto kv = KeyValueConfig::from_string(
      "task.kind = uci\n"
      "task.path = " + data_path + "\n" +
      "task.schema = " + schema_path + "\n" +
      "ensemble.heads = 6\n"
      "ensemble.hidden = 12\n"
      "train.steps = 400\n"
      "train.batch = 16\n"
      "adapt.budgets = 0,2\n"
      "adapt.criterion = variance\n"
      "seeds = 0\n");
  auto config = experiment_config_from_kv(kv);
  config.validate();
  const auto report = run_experiment(config);
  CHECK(report.metric == "rmse");
  // the linear map is easy: normalized in-sample rmse should be small
  CHECK(report.seeds[0].uniform_score < 0.5);
}
