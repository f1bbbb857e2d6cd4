#include "hyre/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hyre/errors.hpp"

namespace hyre::bench {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  const std::string last = trim(cur);
  if (!last.empty() || !out.empty()) out.push_back(last);
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + key + "': bad number '" + value + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw std::invalid_argument("config: key '" + key + "': bad integer '" + value + "'");
  }
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::from_string(const std::string& text) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw format_error("config line " + std::to_string(line_no) +
                         ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw format_error("config line " + std::to_string(line_no) + ": empty key");
    }
    if (kv.entries_.count(key)) {
      throw format_error("config line " + std::to_string(line_no) +
                         ": duplicate key '" + key + "'");
    }
    kv.entries_[key] = value;
  }
  return kv;
}

KeyValueConfig KeyValueConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

bool KeyValueConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

std::string KeyValueConfig::require(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw std::invalid_argument("config: missing required key '" + key + "'");
  }
  return it->second;
}

double KeyValueConfig::get_real(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : parse_real(key, it->second);
}

std::size_t KeyValueConfig::get_count(const std::string& key, std::size_t fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback
                              : static_cast<std::size_t>(parse_u64(key, it->second));
}

bool KeyValueConfig::get_flag(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw std::invalid_argument("config: key '" + key + "': bad flag '" + it->second + "'");
}

std::vector<std::size_t> KeyValueConfig::get_count_list(
    const std::string& key, std::vector<std::size_t> fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<std::size_t> out;
  for (const auto& item : split_list(it->second)) {
    out.push_back(static_cast<std::size_t>(parse_u64(key, item)));
  }
  return out;
}

std::vector<std::uint64_t> KeyValueConfig::get_seed_list(
    const std::string& key, std::vector<std::uint64_t> fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(it->second)) out.push_back(parse_u64(key, item));
  return out;
}

void ExperimentConfig::validate() const {
  if (task.kind != "gp" && task.kind != "conflicting" && task.kind != "hypercube" &&
      task.kind != "uci") {
    throw std::invalid_argument("config: unknown task kind '" + task.kind + "'");
  }
  if (task.kind == "uci") {
    if (task.path.empty() || task.schema_path.empty()) {
      throw std::invalid_argument("config: uci task needs task.path and task.schema");
    }
    std::ifstream probe(task.path);
    if (!probe) throw std::invalid_argument("config: data file not found: " + task.path);
    std::ifstream probe2(task.schema_path);
    if (!probe2) {
      throw std::invalid_argument("config: schema file not found: " + task.schema_path);
    }
  }
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
  if (adapt.budgets.empty()) {
    throw std::invalid_argument("config: adapt.budgets must be non-empty");
  }
  const bool regression = task.kind == "gp" || task.kind == "uci";
  if (regression) {
    if (adapt.loss != LossKind::squared_error) {
      throw std::invalid_argument("config: regression tasks use adapt.loss = squared_error");
    }
    if (adapt.criterion == active::Criterion::entropy ||
        adapt.criterion == active::Criterion::bald) {
      throw std::invalid_argument("config: entropy/bald criteria need classification");
    }
  } else {
    if (adapt.loss != LossKind::zero_one) {
      throw std::invalid_argument("config: classification tasks use adapt.loss = zero_one");
    }
    if (adapt.criterion == active::Criterion::variance) {
      throw std::invalid_argument("config: variance criterion needs regression");
    }
  }
  for (std::size_t b : adapt.budgets) {
    if (b > task.pool_n && task.kind != "uci") {
      throw std::invalid_argument("config: budget exceeds pool size");
    }
  }
}

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "name", "task.kind", "task.path", "task.schema", "task.ood_fraction",
      "task.train_fraction", "task.gp.signal_variance", "task.gp.lengthscale",
      "task.gp.noise_variance", "task.gp.train_n", "task.gp.test_n",
      "task.labelers", "task.points", "task.pool_n", "task.eval_n",
      "task.train_n", "ensemble.heads", "ensemble.architecture",
      "ensemble.prior_scale", "ensemble.index_dim", "ensemble.hidden",
      "ensemble.activation", "train.steps", "train.batch", "train.optimizer",
      "train.lr", "train.weight_decay", "train.loss", "adapt.budgets",
      "adapt.criterion", "adapt.loss", "finetune", "finetune.steps", "seeds",
      "out"};
  return keys;
}

}  // namespace

ExperimentConfig experiment_config_from_kv(const KeyValueConfig& kv) {
  for (const auto& [key, value] : kv.entries()) {
    (void)value;
    if (!known_keys().count(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "'");
    }
  }

  ExperimentConfig config;
  config.name = kv.get("name", "experiment");
  config.task.kind = kv.require("task.kind");
  config.task.path = kv.get("task.path", "");
  config.task.schema_path = kv.get("task.schema", "");
  config.task.split.ood_fraction = kv.get_real("task.ood_fraction", 0.05);
  config.task.split.train_fraction = kv.get_real("task.train_fraction", 0.9);
  config.task.gp.signal_variance = kv.get_real("task.gp.signal_variance", 1.0);
  config.task.gp.lengthscale = kv.get_real("task.gp.lengthscale", 0.2);
  config.task.gp.noise_variance = kv.get_real("task.gp.noise_variance", 0.0);
  config.task.gp_train_n = kv.get_count("task.gp.train_n", 7);
  config.task.gp_test_n = kv.get_count("task.gp.test_n", 1000);
  config.task.n_labelers = kv.get_count("task.labelers", 10);
  config.task.n_points = kv.get_count("task.points", 512);
  config.task.pool_n = kv.get_count("task.pool_n", 256);
  config.task.eval_n = kv.get_count("task.eval_n", 2048);
  config.task.hc_train_n = kv.get_count("task.train_n", 256);

  config.ensemble.heads = kv.get_count("ensemble.heads", 100);
  config.ensemble.arch = parse_architecture(kv.get("ensemble.architecture", "shared_base"));
  config.ensemble.prior_scale = kv.get_real("ensemble.prior_scale", 1.0);
  config.ensemble.index_dim = kv.get_count("ensemble.index_dim", 10);
  config.ensemble.hidden = kv.get_count_list("ensemble.hidden", {128});
  config.ensemble.activation = nn::parse_activation(kv.get("ensemble.activation", "relu"));

  config.train.steps = kv.get_count("train.steps", 2000);
  config.train.batch_size = kv.get_count("train.batch", 64);
  config.train.optimizer.kind = nn::parse_opt_kind(kv.get("train.optimizer", "adam"));
  config.train.optimizer.learning_rate = kv.get_real("train.lr", 1e-3);
  config.train.optimizer.weight_decay = kv.get_real("train.weight_decay", 0.0);
  config.train.loss = parse_task_kind(kv.get(
      "train.loss",
      (config.task.kind == "gp" || config.task.kind == "uci") ? "regression" : "binary"));

  config.adapt.budgets = kv.get_count_list("adapt.budgets", {0, 1, 2, 4, 8, 16, 32});
  const bool regression = config.task.kind == "gp" || config.task.kind == "uci";
  config.adapt.criterion =
      active::parse_criterion(kv.get("adapt.criterion", regression ? "variance" : "bald"));
  config.adapt.loss =
      parse_loss_kind(kv.get("adapt.loss", regression ? "squared_error" : "zero_one"));

  config.run_finetune = kv.get_flag("finetune", false);
  config.finetune_steps = kv.get_count("finetune.steps", 200);
  config.seeds = kv.get_seed_list("seeds", {0, 1, 2, 3, 4});
  config.out_dir = kv.get("out", "runs/out");
  return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  auto config = experiment_config_from_kv(KeyValueConfig::from_file(path));
  config.validate();
  return config;
}

std::string canonical_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "name = " << c.name << "\n";
  out << "task.kind = " << c.task.kind << "\n";
  if (c.task.kind == "uci") {
    out << "task.path = " << c.task.path << "\n";
    out << "task.schema = " << c.task.schema_path << "\n";
    out << "task.ood_fraction = " << c.task.split.ood_fraction << "\n";
    out << "task.train_fraction = " << c.task.split.train_fraction << "\n";
  }
  if (c.task.kind == "gp") {
    out << "task.gp.signal_variance = " << c.task.gp.signal_variance << "\n";
    out << "task.gp.lengthscale = " << c.task.gp.lengthscale << "\n";
    out << "task.gp.noise_variance = " << c.task.gp.noise_variance << "\n";
    out << "task.gp.train_n = " << c.task.gp_train_n << "\n";
    out << "task.gp.test_n = " << c.task.gp_test_n << "\n";
  }
  if (c.task.kind == "conflicting") {
    out << "task.labelers = " << c.task.n_labelers << "\n";
    out << "task.points = " << c.task.n_points << "\n";
  }
  if (c.task.kind == "hypercube") {
    out << "task.train_n = " << c.task.hc_train_n << "\n";
  }
  if (c.task.kind != "uci") {
    out << "task.pool_n = " << c.task.pool_n << "\n";
    out << "task.eval_n = " << c.task.eval_n << "\n";
  }
  out << "ensemble.heads = " << c.ensemble.heads << "\n";
  out << "ensemble.architecture = " << architecture_name(c.ensemble.arch) << "\n";
  out << "ensemble.prior_scale = " << c.ensemble.prior_scale << "\n";
  if (c.ensemble.arch == Architecture::epinet) {
    out << "ensemble.index_dim = " << c.ensemble.index_dim << "\n";
  }
  out << "ensemble.hidden =";
  for (std::size_t h : c.ensemble.hidden) out << " " << h;
  out << "\nensemble.activation = " << nn::activation_name(c.ensemble.activation) << "\n";
  out << "train.steps = " << c.train.steps << "\n";
  out << "train.batch = " << c.train.batch_size << "\n";
  out << "train.optimizer = " << (c.train.optimizer.kind == nn::OptKind::adam ? "adam" : "sgd")
      << "\n";
  out << "train.lr = " << c.train.optimizer.learning_rate << "\n";
  out << "train.weight_decay = " << c.train.optimizer.weight_decay << "\n";
  out << "train.loss = " << task_kind_name(c.train.loss) << "\n";
  out << "adapt.budgets =";
  for (std::size_t b : c.adapt.budgets) out << " " << b;
  out << "\nadapt.criterion = " << active::criterion_name(c.adapt.criterion) << "\n";
  out << "adapt.loss = " << loss_kind_name(c.adapt.loss) << "\n";
  out << "finetune = " << (c.run_finetune ? "true" : "false") << "\n";
  if (c.run_finetune) out << "finetune.steps = " << c.finetune_steps << "\n";
  out << "seeds =";
  for (auto s : c.seeds) out << " " << s;
  out << "\n";
  return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = canonical_config(config);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace hyre::bench
