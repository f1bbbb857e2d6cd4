#include "hyre/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "hyre/errors.hpp"
#include "hyre/rng.hpp"
#include "hyre/tasks.hpp"

namespace hyre::bench {

const char* metric_name(Metric m) {
  return m == Metric::rmse ? "rmse" : "accuracy";
}

bool lower_is_better(Metric m) { return m == Metric::rmse; }

double rmse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size() || predictions.empty()) {
    throw std::invalid_argument("rmse: size mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - targets[i];
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(predictions.size()));
}

double accuracy_from_probabilities(std::span<const double> probabilities,
                                   std::span<const double> targets) {
  if (probabilities.size() != targets.size() || probabilities.empty()) {
    throw std::invalid_argument("accuracy: size mismatch");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = probabilities[i];
    if ((p > 0.5 && targets[i] == 1.0) || (p < 0.5 && targets[i] == 0.0)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(targets.size());
}

Dataset PreparedTask::labeled_eval() const {
  Dataset d;
  d.kind = metric == Metric::rmse ? TaskKind::regression : TaskKind::binary;
  d.features = eval_inputs;
  d.targets = eval_targets;
  return d;
}

PreparedTask prepare_task(const TaskSpec& spec, std::uint64_t data_seed) {
  PreparedTask pt;
  const Rng root(data_seed);

  if (spec.kind == "gp") {
    const auto sample = tasks::sample_gp_dataset(spec.gp, spec.gp_train_n,
                                                 spec.gp_test_n, data_seed, 1);
    pt.train = sample.train;
    pt.eval_inputs = sample.test_inputs;
    pt.eval_targets.assign(sample.posterior_draws.data.begin(),
                           sample.posterior_draws.data.end());
    pt.pool_inputs = pt.eval_inputs;
    pt.pool_labels = pt.eval_targets;
    pt.metric = Metric::rmse;
  } else if (spec.kind == "conflicting") {
    const auto task = tasks::gen_conflicting_preferences(spec.n_labelers,
                                                         spec.n_points, data_seed);
    pt.train = task.train;
    auto pool = tasks::label_points(
        task.held_out, tasks::sample_unit_square(spec.pool_n, root.split(10).next_u64()));
    auto eval = tasks::label_points(
        task.held_out, tasks::sample_unit_square(spec.eval_n, root.split(11).next_u64()));
    pt.pool_inputs = std::move(pool.features);
    pt.pool_labels = std::move(pool.targets);
    pt.eval_inputs = std::move(eval.features);
    pt.eval_targets = std::move(eval.targets);
    pt.metric = Metric::accuracy;
  } else if (spec.kind == "hypercube") {
    const auto task = tasks::gen_hypercube_task(data_seed, spec.hc_train_n, spec.eval_n);
    pt.train = task.train;
    auto pool = tasks::sample_hypercube_target(task.boundary, spec.pool_n,
                                               root.split(10).next_u64());
    pt.pool_inputs = std::move(pool.features);
    pt.pool_labels = std::move(pool.targets);
    pt.eval_inputs = task.target.features;
    pt.eval_targets = task.target.targets;
    pt.metric = Metric::accuracy;
  } else if (spec.kind == "uci") {
    const auto schema = tasks::load_schema(spec.schema_path);
    const Dataset all = tasks::load_table(spec.path, schema);
    tasks::SplitSpec split_spec = spec.split;
    split_spec.seed = data_seed;
    auto split = tasks::ood_split(all, split_spec);
    pt.train = std::move(split.train);
    pt.pool_inputs = split.ood.features;
    pt.pool_labels = split.ood.targets;
    pt.eval_inputs = std::move(split.ood.features);
    pt.eval_targets = std::move(split.ood.targets);
    pt.metric = Metric::rmse;
  } else {
    throw std::invalid_argument("prepare_task: unknown task kind '" + spec.kind + "'");
  }
  return pt;
}

double weighted_score(const EnsembleModel& model, const BeliefState& belief,
                      const PreparedTask& task) {
  if (task.metric == Metric::rmse) {
    const auto preds =
        weighted_predict(model, belief, task.eval_inputs, Combine::raw_outputs);
    return rmse(preds, task.eval_targets);
  }
  const auto probs =
      weighted_predict(model, belief, task.eval_inputs, Combine::probabilities);
  return accuracy_from_probabilities(probs, task.eval_targets);
}

double head_score(const EnsembleModel& model, std::size_t head,
                  const PreparedTask& task) {
  const nn::Matrix preds = ensemble_forward(model, task.eval_inputs);
  if (head >= preds.rows) throw std::invalid_argument("head_score: head out of range");
  const std::span<const double> row(preds.data.data() + head * preds.cols, preds.cols);
  if (task.metric == Metric::rmse) return rmse(row, task.eval_targets);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    // logit thresholded at 0; ties count as errors
    if ((row[i] > 0.0 && task.eval_targets[i] == 1.0) ||
        (row[i] < 0.0 && task.eval_targets[i] == 0.0)) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(row.size());
}

namespace {

Dataset concat_datasets(const Dataset& a, const Dataset& b) {
  if (a.kind != b.kind || a.features.cols != b.features.cols) {
    throw std::invalid_argument("concat_datasets: incompatible datasets");
  }
  Dataset out;
  out.kind = a.kind;
  out.features = nn::Matrix(a.features.rows + b.features.rows, a.features.cols);
  std::copy(a.features.data.begin(), a.features.data.end(), out.features.data.begin());
  std::copy(b.features.data.begin(), b.features.data.end(),
            out.features.data.begin() + static_cast<std::ptrdiff_t>(a.features.data.size()));
  out.targets = a.targets;
  out.targets.insert(out.targets.end(), b.targets.begin(), b.targets.end());
  return out;
}

}  // namespace

double finetune_baseline(const EnsembleModel& model, const Dataset& train_data,
                         const Dataset& adapt_data, const TrainConfig& tc,
                         std::size_t steps, const PreparedTask& task,
                         std::uint64_t seed) {
  EnsembleModel clone = model;
  if (steps > 0 && adapt_data.size() > 0) {
    const Dataset combined = concat_datasets(train_data, adapt_data);
    TrainConfig ft = tc;
    ft.steps = steps;
    ft.seed = seed;
    train_ensemble(clone, combined, ft);
  }
  return weighted_score(clone, init_belief(clone.config.heads), task);
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate agg;
  if (values.empty()) return agg;
  for (double v : values) agg.mean += v;
  agg.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) {
      const double d = v - agg.mean;
      acc += d * d;
    }
    agg.stddev = std::sqrt(acc / static_cast<double>(values.size() - 1));
  }
  return agg;
}

namespace {

SeedResult run_one_seed(const ExperimentConfig& config, std::uint64_t seed) {
  const Rng root(seed);
  const std::uint64_t data_seed = root.split(1).next_u64();
  const std::uint64_t model_seed = root.split(2).next_u64();
  const std::uint64_t train_seed = root.split(3).next_u64();
  const std::uint64_t criterion_seed = root.split(4).next_u64();
  const std::uint64_t finetune_seed = root.split(5).next_u64();

  SeedResult result;
  result.seed = seed;

  PreparedTask task = prepare_task(config.task, data_seed);

  EnsembleConfig ens = config.ensemble;
  ens.input_dim = task.train.feature_dim();
  ens.seed = model_seed;
  EnsembleModel model = build_ensemble(ens);

  TrainConfig tc = config.train;
  tc.seed = train_seed;
  const auto history = train_ensemble(model, task.train, tc);
  result.final_train_loss = history.empty() ? 0.0 : history.back();

  result.uniform_score = weighted_score(model, init_belief(ens.heads), task);

  const PointLoss eval_loss{task.metric == Metric::rmse ? LossKind::squared_error
                                                        : LossKind::zero_one};
  result.best_head_index = best_head(model, task.labeled_eval(), eval_loss);
  result.best_head_score = head_score(model, result.best_head_index, task);

  const std::size_t max_budget =
      *std::max_element(config.adapt.budgets.begin(), config.adapt.budgets.end());
  if (max_budget > task.pool_inputs.rows) {
    throw std::invalid_argument("run_experiment: budget exceeds pool size");
  }

  active::Pool pool(task.pool_inputs, task.pool_labels, max_budget);
  const active::QueryCriterion criterion{config.adapt.criterion, criterion_seed};
  const PointLoss adapt_loss{config.adapt.loss};
  const auto adapted = active::run_adaptation(model, pool, max_budget, criterion,
                                              adapt_loss);

  // belief at budget b = losses accumulated over the first b revealed points
  for (const std::size_t budget : config.adapt.budgets) {
    BeliefState belief = init_belief(ens.heads);
    for (std::size_t i = 0; i < budget; ++i) {
      const auto& rec = adapted.log[i];
      nn::Matrix x(1, task.pool_inputs.cols);
      const auto src = task.pool_inputs.row(rec.pool_index);
      std::copy(src.begin(), src.end(), x.data.begin());
      const nn::Matrix preds = ensemble_forward(model, x);
      belief = accumulate(belief,
                          per_head_losses(std::span<const double>(preds.data),
                                          adapt_loss, rec.revealed_label));
    }
    result.hyre_scores.push_back(weighted_score(model, belief, task));
  }

  if (config.run_finetune) {
    for (const std::size_t budget : config.adapt.budgets) {
      if (budget == 0) {
        result.finetune_scores.push_back(result.uniform_score);
        continue;
      }
      Dataset adapt_data;
      adapt_data.kind = task.train.kind;
      adapt_data.features = nn::Matrix(budget, task.pool_inputs.cols);
      adapt_data.targets.resize(budget);
      for (std::size_t i = 0; i < budget; ++i) {
        const auto& rec = adapted.log[i];
        const auto src = task.pool_inputs.row(rec.pool_index);
        std::copy(src.begin(), src.end(), adapt_data.features.row(i).begin());
        adapt_data.targets[i] = rec.revealed_label;
      }
      result.finetune_scores.push_back(finetune_baseline(
          model, task.train, adapt_data, config.train, config.finetune_steps, task,
          finetune_seed));
    }
  }
  return result;
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();

  RunReport report;
  report.config_digest = config_hash(config);
  report.budgets = config.adapt.budgets;
  report.seeds.resize(config.seeds.size());

  // independent seeds run in parallel workers; each run is single-threaded
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()),
                            config.seeds.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(config.seeds.size());
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= config.seeds.size()) return;
        try {
          report.seeds[i] = run_one_seed(config, config.seeds[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }

  std::vector<double> uniform, best;
  for (const auto& s : report.seeds) {
    uniform.push_back(s.uniform_score);
    best.push_back(s.best_head_score);
  }
  report.uniform = aggregate(uniform);
  report.best_head = aggregate(best);
  for (std::size_t bi = 0; bi < report.budgets.size(); ++bi) {
    std::vector<double> hyre_vals, ft_vals;
    for (const auto& s : report.seeds) {
      hyre_vals.push_back(s.hyre_scores[bi]);
      if (!s.finetune_scores.empty()) ft_vals.push_back(s.finetune_scores[bi]);
    }
    report.hyre.push_back(aggregate(hyre_vals));
    if (!ft_vals.empty()) report.finetune.push_back(aggregate(ft_vals));
  }

  const std::string task_metric =
      (config.task.kind == "gp" || config.task.kind == "uci") ? "rmse" : "accuracy";
  report.metric = task_metric;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw io_error("write failed: " + path);
}

}  // namespace

void emit_report(const RunReport& report, const ExperimentConfig& config,
                 const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory: " + dir + ": " + ec.message());

  // metrics.csv: one row per seed x budget
  std::ostringstream csv;
  csv << "# config_hash = " << report.config_digest << "\n";
  csv << "# metric = " << report.metric << "\n";
  csv << "seed,budget,uniform,hyre,best_head,finetune\n";
  for (const auto& s : report.seeds) {
    for (std::size_t bi = 0; bi < report.budgets.size(); ++bi) {
      csv << s.seed << "," << report.budgets[bi] << "," << fmt(s.uniform_score) << ","
          << fmt(s.hyre_scores[bi]) << "," << fmt(s.best_head_score) << ",";
      if (!s.finetune_scores.empty()) csv << fmt(s.finetune_scores[bi]);
      csv << "\n";
    }
  }
  write_file(dir + "/metrics.csv", csv.str());

  nlohmann::json agg;
  agg["config_hash"] = report.config_digest;
  agg["config"] = canonical_config(config);
  agg["metric"] = report.metric;
  agg["n_seeds"] = report.seeds.size();
  agg["wall_seconds"] = report.wall_seconds;
  agg["uniform"] = {{"mean", report.uniform.mean}, {"std", report.uniform.stddev}};
  agg["best_head"] = {{"mean", report.best_head.mean}, {"std", report.best_head.stddev}};
  agg["budgets"] = report.budgets;
  nlohmann::json hyre_json = nlohmann::json::array();
  for (const auto& a : report.hyre) {
    hyre_json.push_back({{"mean", a.mean}, {"std", a.stddev}});
  }
  agg["hyre"] = hyre_json;
  if (!report.finetune.empty()) {
    nlohmann::json ft_json = nlohmann::json::array();
    for (const auto& a : report.finetune) {
      ft_json.push_back({{"mean", a.mean}, {"std", a.stddev}});
    }
    agg["finetune"] = ft_json;
  }
  write_file(dir + "/aggregate.json", agg.dump(2) + "\n");

  // plot data: budget vs score curve
  std::ostringstream curve;
  curve << "budget,hyre_mean,hyre_std,finetune_mean,finetune_std\n";
  for (std::size_t bi = 0; bi < report.budgets.size(); ++bi) {
    curve << report.budgets[bi] << "," << fmt(report.hyre[bi].mean) << ","
          << fmt(report.hyre[bi].stddev) << ",";
    if (!report.finetune.empty()) {
      curve << fmt(report.finetune[bi].mean) << "," << fmt(report.finetune[bi].stddev);
    } else {
      curve << ",";
    }
    curve << "\n";
  }
  write_file(dir + "/budget_curve.csv", curve.str());

  // plot data: uniform vs best-head bars
  std::ostringstream bars;
  bars << "quantity,mean,std\n";
  bars << "uniform," << fmt(report.uniform.mean) << "," << fmt(report.uniform.stddev)
       << "\n";
  bars << "best_head," << fmt(report.best_head.mean) << ","
       << fmt(report.best_head.stddev) << "\n";
  write_file(dir + "/uniform_vs_best.csv", bars.str());
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open metrics file: " + path);
  std::vector<MetricsRow> rows;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "seed,budget,uniform,hyre,best_head,finetune") {
        throw format_error(path + ": unexpected header '" + line + "'");
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    fields.push_back(cur);
    if (fields.size() != 6) {
      throw format_error(path + ": row " + std::to_string(line_no) +
                         ": expected 6 fields");
    }
    MetricsRow row{};
    auto parse_num = [&](const std::string& s, double& out_val) {
      char* end = nullptr;
      out_val = std::strtod(s.c_str(), &end);
      if (end != s.c_str() + s.size()) {
        throw format_error(path + ": row " + std::to_string(line_no) +
                           ": bad number '" + s + "'");
      }
    };
    row.seed = std::stoull(fields[0]);
    row.budget = std::stoull(fields[1]);
    parse_num(fields[2], row.uniform);
    parse_num(fields[3], row.hyre);
    parse_num(fields[4], row.best_head);
    row.has_finetune = !fields[5].empty();
    if (row.has_finetune) parse_num(fields[5], row.finetune);
    rows.push_back(row);
  }
  if (!header_seen) throw format_error(path + ": no header row");
  return rows;
}

}  // namespace hyre::bench
