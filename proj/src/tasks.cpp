#include "hyre/tasks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "hyre/errors.hpp"
#include "hyre/rng.hpp"

namespace hyre::tasks {

using nn::Matrix;

// ---------------------------------------------------------------------------
// GP pieces

void GpSpec::validate() const {
  if (signal_variance <= 0.0 || lengthscale <= 0.0) {
    throw std::invalid_argument("GpSpec: signal_variance and lengthscale must be > 0");
  }
  if (noise_variance < 0.0 || jitter < 0.0) {
    throw std::invalid_argument("GpSpec: noise_variance and jitter must be >= 0");
  }
}

double gp_kernel(const GpSpec& spec, double a, double b) {
  const double d = (a - b) / spec.lengthscale;
  return spec.signal_variance * std::exp(-0.5 * d * d);
}

Matrix gp_kernel_matrix(const GpSpec& spec, std::span<const double> xs,
                        std::span<const double> ys) {
  Matrix k(xs.size(), ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t j = 0; j < ys.size(); ++j) {
      k.at(i, j) = gp_kernel(spec, xs[i], ys[j]);
    }
  }
  return k;
}

namespace {

// Lower Cholesky of a symmetric PSD matrix; tried exactly first, then with
// escalating jitter up to 1e-6.
Matrix cholesky_with_jitter(Matrix a, double jitter) {
  const std::size_t n = a.rows;
  const double start = jitter > 0.0 ? jitter : 1e-12;
  for (double eps = 0.0; eps <= 1e-6 + 1e-18; eps = (eps == 0.0 ? start : eps * 10.0)) {
    Matrix l(n, n);
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double acc = a.at(i, j) + (i == j ? eps : 0.0);
        for (std::size_t k = 0; k < j; ++k) acc -= l.at(i, k) * l.at(j, k);
        if (i == j) {
          if (acc <= 0.0) {
            ok = false;
            break;
          }
          l.at(i, i) = std::sqrt(acc);
        } else {
          l.at(i, j) = acc / l.at(j, j);
        }
      }
    }
    if (ok) return l;
  }
  throw numeric_error("cholesky: factorization failed after jitter escalation");
}

std::vector<double> solve_lower(const Matrix& l, std::span<const double> b) {
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t i = 0; i < l.rows; ++i) {
    double acc = x[i];
    for (std::size_t k = 0; k < i; ++k) acc -= l.at(i, k) * x[k];
    x[i] = acc / l.at(i, i);
  }
  return x;
}

std::vector<double> solve_upper_from_lower(const Matrix& l, std::span<const double> b) {
  // solves L^T x = b
  std::vector<double> x(b.begin(), b.end());
  for (std::size_t ii = l.rows; ii-- > 0;) {
    double acc = x[ii];
    for (std::size_t k = ii + 1; k < l.rows; ++k) acc -= l.at(k, ii) * x[k];
    x[ii] = acc / l.at(ii, ii);
  }
  return x;
}

std::vector<double> column(const Matrix& m, std::size_t j) {
  std::vector<double> out(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) out[i] = m.at(i, j);
  return out;
}

std::vector<double> first_column(const Dataset& d) {
  if (d.features.cols != 1) {
    throw std::invalid_argument("gp: expected 1-d inputs");
  }
  return d.features.data;
}

}  // namespace

GpPosterior gp_posterior(const GpSpec& spec, const Dataset& train,
                         std::span<const double> query_inputs) {
  spec.validate();
  train.validate();
  const auto train_x = first_column(train);
  const std::size_t n = train_x.size();
  const std::size_t q = query_inputs.size();

  Matrix k_train = gp_kernel_matrix(spec, train_x, train_x);
  for (std::size_t i = 0; i < n; ++i) k_train.at(i, i) += spec.noise_variance;
  const Matrix l = cholesky_with_jitter(std::move(k_train), spec.jitter);

  // alpha = (K + sigma_n^2 I)^{-1} y
  const auto alpha = solve_upper_from_lower(l, solve_lower(l, train.targets));

  const Matrix k_cross = gp_kernel_matrix(spec, train_x, query_inputs);  // n x q
  GpPosterior post;
  post.mean.assign(q, 0.0);
  for (std::size_t j = 0; j < q; ++j) {
    for (std::size_t i = 0; i < n; ++i) post.mean[j] += k_cross.at(i, j) * alpha[i];
  }

  // Sigma* = K** - K*^T (K + sigma_n^2 I)^{-1} K*
  Matrix w(n, q);  // w = L^{-1} K*
  for (std::size_t j = 0; j < q; ++j) {
    const auto col = solve_lower(l, column(k_cross, j));
    for (std::size_t i = 0; i < n; ++i) w.at(i, j) = col[i];
  }
  post.covariance = gp_kernel_matrix(spec, query_inputs, query_inputs);
  for (std::size_t a = 0; a < q; ++a) {
    for (std::size_t b = 0; b < q; ++b) {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += w.at(i, a) * w.at(i, b);
      post.covariance.at(a, b) -= acc;
    }
  }
  return post;
}

GpSample sample_gp_dataset(const GpSpec& spec, std::size_t n_train,
                           std::size_t n_test, std::uint64_t seed,
                           std::size_t n_draws) {
  spec.validate();
  if (n_train == 0 || n_test == 0) {
    throw std::invalid_argument("sample_gp_dataset: empty sizes");
  }
  Rng rng(seed);

  std::vector<double> train_x(n_train);
  for (auto& x : train_x) x = rng.uniform();
  std::sort(train_x.begin(), train_x.end());

  // targets from the GP prior at the training inputs, plus observation noise
  const Matrix l =
      cholesky_with_jitter(gp_kernel_matrix(spec, train_x, train_x), spec.jitter);
  std::vector<double> xi(n_train);
  for (auto& v : xi) v = rng.normal();
  std::vector<double> y(n_train, 0.0);
  for (std::size_t i = 0; i < n_train; ++i) {
    for (std::size_t k = 0; k <= i; ++k) y[i] += l.at(i, k) * xi[k];
  }
  if (spec.noise_variance > 0.0) {
    const double sn = std::sqrt(spec.noise_variance);
    for (auto& v : y) v += sn * rng.normal();
  }

  GpSample sample;
  sample.train.kind = TaskKind::regression;
  sample.train.features = Matrix(n_train, 1, train_x);
  sample.train.targets = std::move(y);

  sample.test_inputs = Matrix(n_test, 1);
  for (std::size_t i = 0; i < n_test; ++i) {
    sample.test_inputs.data[i] =
        n_test == 1 ? 0.5 : static_cast<double>(i) / static_cast<double>(n_test - 1);
  }

  const GpPosterior post =
      gp_posterior(spec, sample.train, sample.test_inputs.data);
  const Matrix lp = cholesky_with_jitter(post.covariance, spec.jitter);
  sample.posterior_draws = Matrix(n_draws, n_test);
  std::vector<double> zeta(n_test);
  for (std::size_t d = 0; d < n_draws; ++d) {
    for (auto& v : zeta) v = rng.normal();
    for (std::size_t i = 0; i < n_test; ++i) {
      double acc = post.mean[i];
      for (std::size_t k = 0; k <= i; ++k) acc += lp.at(i, k) * zeta[k];
      sample.posterior_draws.at(d, i) = acc;
    }
  }
  return sample;
}

// ---------------------------------------------------------------------------
// Bradley-Terry / labeler populations

double bt_preference_prob(double theta_i, double theta_j) {
  if (!std::isfinite(theta_i) || !std::isfinite(theta_j)) {
    throw std::invalid_argument("bt_preference_prob: non-finite input");
  }
  const double d = theta_i - theta_j;
  return d >= 0.0 ? 1.0 / (1.0 + std::exp(-d)) : std::exp(d) / (1.0 + std::exp(d));
}

double LabelerBoundary::label(std::span<const double> x) const {
  if (x.size() != weights.size()) {
    throw std::invalid_argument("LabelerBoundary: dimension mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += weights[i] * x[i];
  return acc > 0.0 ? 1.0 : 0.0;
}

nn::Matrix sample_unit_square(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Matrix pts(n, 2);
  for (auto& v : pts.data) v = rng.uniform();
  return pts;
}

Dataset label_points(const LabelerBoundary& boundary, Matrix points) {
  Dataset d;
  d.kind = TaskKind::binary;
  d.targets.resize(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) {
    d.targets[i] = boundary.label(points.row(i));
  }
  d.features = std::move(points);
  return d;
}

ConflictingTask gen_conflicting_preferences(std::size_t n_labelers,
                                            std::size_t n_points,
                                            std::uint64_t seed) {
  if (n_labelers == 0 || n_points == 0) {
    throw std::invalid_argument("gen_conflicting_preferences: counts must be >= 1");
  }
  Rng rng(seed);
  ConflictingTask task;
  task.labelers.resize(n_labelers);
  for (auto& lab : task.labelers) {
    lab.weights = {rng.normal(), rng.normal()};
  }
  task.held_out.weights = {rng.normal(), rng.normal()};

  task.train.kind = TaskKind::binary;
  task.train.features = Matrix(n_points, 2);
  task.train.targets.resize(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    task.train.features.at(i, 0) = rng.uniform();
    task.train.features.at(i, 1) = rng.uniform();
    const auto& lab = task.labelers[rng.uniform_index(n_labelers)];
    task.train.targets[i] = lab.label(task.train.features.row(i));
  }
  return task;
}

// ---------------------------------------------------------------------------
// Hypercube shift task

HypercubeTask gen_hypercube_task(std::uint64_t seed, std::size_t n_train,
                                 std::size_t n_target) {
  Rng rng(seed);
  HypercubeTask task;

  task.train.kind = TaskKind::binary;
  task.train.features = Matrix(n_train, 5);
  task.train.targets.resize(n_train);
  for (std::size_t i = 0; i < n_train; ++i) {
    const double label = rng.uniform() < 0.5 ? 0.0 : 1.0;
    for (std::size_t j = 0; j < 5; ++j) {
      const double u = rng.uniform();
      task.train.features.at(i, j) = label == 1.0 ? u : u - 1.0;
    }
    task.train.targets[i] = label;
  }

  task.boundary.weights.resize(5);
  for (auto& w : task.boundary.weights) w = rng.normal();

  task.target = sample_hypercube_target(task.boundary, n_target, rng.split(1).next_u64());
  return task;
}

Dataset sample_hypercube_target(const LabelerBoundary& boundary, std::size_t n,
                                std::uint64_t seed) {
  Rng rng(seed);
  Matrix pts(n, boundary.weights.size());
  for (auto& v : pts.data) v = rng.uniform(-1.0, 1.0);
  return label_points(boundary, std::move(pts));
}

// ---------------------------------------------------------------------------
// Tabular ingestion

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split_fields(const std::string& line, char delim) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_cell(const std::string& raw, std::size_t row, std::size_t col) {
  const std::string cell = trim(raw);
  if (cell.empty() || cell == "NA" || cell == "?" || cell == "nan") {
    throw format_error("row " + std::to_string(row) + ", column " +
                       std::to_string(col) + ": missing value");
  }
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw format_error("row " + std::to_string(row) + ", column " +
                       std::to_string(col) + ": cannot parse '" + cell + "'");
  }
  return value;
}

}  // namespace

TableSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open schema file: " + path);
  TableSchema schema;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw format_error("schema " + path + ": expected key = value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "delimiter") {
      if (value == "comma") {
        schema.delimiter = ',';
      } else if (value == "tab") {
        schema.delimiter = '\t';
      } else if (value == "semicolon") {
        schema.delimiter = ';';
      } else if (value.size() == 1) {
        schema.delimiter = value[0];
      } else {
        throw format_error("schema " + path + ": bad delimiter '" + value + "'");
      }
    } else if (key == "header") {
      schema.header = (value == "true" || value == "1" || value == "yes");
    } else if (key == "target") {
      schema.target = value;
    } else if (key == "drop") {
      for (auto& col : split_fields(value, ',')) {
        const std::string name = trim(col);
        if (!name.empty()) schema.drop.push_back(name);
      }
    } else {
      throw format_error("schema " + path + ": unknown key '" + key + "'");
    }
  }
  if (schema.target.empty()) {
    throw format_error("schema " + path + ": target column missing");
  }
  return schema;
}

Dataset load_table(const std::string& path, const TableSchema& schema) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open data file: " + path);

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  if (lines.empty()) throw format_error(path + ": empty file");

  std::vector<std::string> names;
  std::size_t first_data = 0;
  if (schema.header) {
    for (auto& f : split_fields(lines[0], schema.delimiter)) names.push_back(trim(f));
    first_data = 1;
  } else {
    const std::size_t ncols = split_fields(lines[0], schema.delimiter).size();
    for (std::size_t i = 0; i < ncols; ++i) names.push_back(std::to_string(i));
  }
  const std::size_t ncols = names.size();

  auto resolve = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return i;
    }
    throw format_error(path + ": no column named '" + name + "'");
  };
  const std::size_t target_col = resolve(schema.target);
  std::vector<char> dropped(ncols, 0);
  for (const auto& d : schema.drop) dropped[resolve(d)] = 1;
  dropped[target_col] = 1;

  std::vector<std::size_t> feature_cols;
  for (std::size_t i = 0; i < ncols; ++i) {
    if (!dropped[i]) feature_cols.push_back(i);
  }
  if (feature_cols.empty()) throw format_error(path + ": no feature columns left");

  const std::size_t n = lines.size() - first_data;
  Dataset data;
  data.kind = TaskKind::regression;
  data.features = Matrix(n, feature_cols.size());
  data.targets.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t row_no = r + first_data + 1;  // 1-based, incl. header
    const auto fields = split_fields(lines[r + first_data], schema.delimiter);
    if (fields.size() != ncols) {
      throw format_error(path + ": row " + std::to_string(row_no) + ": expected " +
                         std::to_string(ncols) + " columns, got " +
                         std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < feature_cols.size(); ++j) {
      data.features.at(r, j) = parse_cell(fields[feature_cols[j]], row_no,
                                          feature_cols[j] + 1);
    }
    data.targets[r] = parse_cell(fields[target_col], row_no, target_col + 1);
  }
  return data;
}

// ---------------------------------------------------------------------------
// OOD split

void SplitSpec::validate() const {
  if (!(ood_fraction > 0.0 && ood_fraction < 0.5)) {
    throw std::invalid_argument("SplitSpec: ood_fraction must be in (0, 0.5)");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("SplitSpec: train_fraction must be in (0, 1)");
  }
}

namespace {

Dataset take_rows(const Dataset& src, std::span<const std::size_t> rows) {
  Dataset out;
  out.kind = src.kind;
  out.features = Matrix(rows.size(), src.features.cols);
  out.targets.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = src.features.row(rows[i]);
    std::copy(r.begin(), r.end(), out.features.row(i).begin());
    out.targets[i] = src.targets[rows[i]];
  }
  return out;
}

void apply_norm(Dataset& d, const NormStats& stats) {
  for (std::size_t i = 0; i < d.features.rows; ++i) {
    for (std::size_t j = 0; j < d.features.cols; ++j) {
      d.features.at(i, j) =
          (d.features.at(i, j) - stats.feature_mean[j]) / stats.feature_std[j];
    }
  }
  for (auto& y : d.targets) y = (y - stats.target_mean) / stats.target_std;
  d.norm = stats;
}

}  // namespace

SplitResult ood_split(const Dataset& data, const SplitSpec& spec) {
  data.validate();
  spec.validate();
  if (data.kind == TaskKind::preference) {
    throw std::invalid_argument("ood_split: preference data not supported");
  }
  const std::size_t n = data.features.rows;
  if (n < 20) throw std::invalid_argument("ood_split: need at least 20 rows");

  std::vector<double> row_mean(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = data.features.row(i);
    double acc = 0.0;
    for (double v : r) acc += v;
    row_mean[i] = acc / static_cast<double>(data.features.cols);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return row_mean[a] < row_mean[b];
  });

  const std::size_t tail =
      static_cast<std::size_t>(std::floor(spec.ood_fraction * static_cast<double>(n)));
  std::vector<std::size_t> ood_rows;
  ood_rows.reserve(2 * tail);
  for (std::size_t i = 0; i < tail; ++i) ood_rows.push_back(order[i]);
  for (std::size_t i = n - tail; i < n; ++i) ood_rows.push_back(order[i]);

  std::vector<std::size_t> middle(order.begin() + static_cast<std::ptrdiff_t>(tail),
                                  order.end() - static_cast<std::ptrdiff_t>(tail));
  Rng rng(spec.seed);
  for (std::size_t i = middle.size(); i-- > 1;) {
    const std::size_t j = rng.uniform_index(i + 1);
    std::swap(middle[i], middle[j]);
  }
  const std::size_t n_train = static_cast<std::size_t>(
      std::floor(spec.train_fraction * static_cast<double>(middle.size())));
  if (n_train == 0 || n_train == middle.size()) {
    throw std::invalid_argument("ood_split: degenerate train/val split");
  }

  SplitResult split;
  split.train = take_rows(data, std::span(middle.data(), n_train));
  split.val = take_rows(data, std::span(middle.data() + n_train,
                                        middle.size() - n_train));
  split.ood = take_rows(data, ood_rows);

  // z-scoring stats from training rows only
  NormStats stats;
  const std::size_t d = data.features.cols;
  stats.feature_mean.assign(d, 0.0);
  stats.feature_std.assign(d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(split.train.features.rows);
  for (std::size_t i = 0; i < split.train.features.rows; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      stats.feature_mean[j] += split.train.features.at(i, j);
    }
    stats.target_mean += split.train.targets[i];
  }
  for (auto& v : stats.feature_mean) v *= inv_n;
  stats.target_mean *= inv_n;
  for (std::size_t i = 0; i < split.train.features.rows; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = split.train.features.at(i, j) - stats.feature_mean[j];
      stats.feature_std[j] += c * c;
    }
    const double c = split.train.targets[i] - stats.target_mean;
    stats.target_std += c * c;
  }
  for (auto& v : stats.feature_std) {
    v = std::sqrt(v * inv_n);
    if (v == 0.0) v = 1.0;  // constant feature: leave centered values at zero
  }
  stats.target_std = std::sqrt(stats.target_std * inv_n);
  if (stats.target_std == 0.0) stats.target_std = 1.0;

  apply_norm(split.train, stats);
  apply_norm(split.val, stats);
  apply_norm(split.ood, stats);
  return split;
}

std::string dump_dataset(const Dataset& data) {
  std::ostringstream out;
  out.precision(17);
  out << "# kind=" << task_kind_name(data.kind) << " n=" << data.features.rows
      << " d=" << data.features.cols << "\n";
  for (std::size_t j = 0; j < data.features.cols; ++j) out << "x" << j << ",";
  out << "y\n";
  for (std::size_t i = 0; i < data.features.rows; ++i) {
    for (std::size_t j = 0; j < data.features.cols; ++j) {
      out << data.features.at(i, j) << ",";
    }
    out << (i < data.targets.size() ? data.targets[i] : 0.0) << "\n";
  }
  return out.str();
}

}  // namespace hyre::tasks
