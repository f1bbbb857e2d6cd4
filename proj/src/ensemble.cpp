#include "hyre/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hyre/errors.hpp"
#include "hyre/rng.hpp"

namespace hyre {

using nn::Matrix;
using nn::MlpParams;

Architecture parse_architecture(const std::string& tag) {
  if (tag == "vanilla") return Architecture::vanilla;
  if (tag == "shared_base") return Architecture::shared_base;
  if (tag == "epinet") return Architecture::epinet;
  throw std::invalid_argument("unknown architecture: " + tag);
}

const char* architecture_name(Architecture a) {
  switch (a) {
    case Architecture::vanilla: return "vanilla";
    case Architecture::shared_base: return "shared_base";
    case Architecture::epinet: return "epinet";
  }
  return "?";
}

void EnsembleConfig::validate() const {
  if (heads == 0) throw std::invalid_argument("EnsembleConfig: heads must be >= 1");
  if (prior_scale < 0.0 || !std::isfinite(prior_scale)) {
    throw std::invalid_argument("EnsembleConfig: prior_scale must be >= 0");
  }
  if (input_dim == 0) throw std::invalid_argument("EnsembleConfig: input_dim unset");
  if (arch == Architecture::epinet) {
    if (index_dim == 0) throw std::invalid_argument("EnsembleConfig: index_dim must be >= 1");
    if (hidden.empty()) {
      throw std::invalid_argument("EnsembleConfig: epinet needs a hidden layer for features");
    }
  }
  for (std::size_t h : hidden) {
    if (h == 0) throw std::invalid_argument("EnsembleConfig: zero hidden size");
  }
}

namespace {

std::vector<std::size_t> component_sizes(std::size_t in,
                                         const std::vector<std::size_t>& hidden,
                                         std::size_t out) {
  std::vector<std::size_t> sizes;
  sizes.reserve(hidden.size() + 2);
  sizes.push_back(in);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

EnsembleModel build_ensemble(const EnsembleConfig& config) {
  config.validate();
  EnsembleModel model;
  model.config = config;
  const Rng root(config.seed);
  const auto act = config.activation;

  switch (config.arch) {
    case Architecture::vanilla: {
      model.members.reserve(config.heads);
      for (std::size_t k = 0; k < config.heads; ++k) {
        model.members.push_back(
            nn::init_params(component_sizes(config.input_dim, config.hidden, 1),
                            act, root.split(0x10000 + k).next_u64()));
      }
      break;
    }
    case Architecture::shared_base: {
      const auto sizes = component_sizes(config.input_dim, config.hidden, config.heads);
      model.prior_net = nn::init_params(sizes, act, root.split(1).next_u64());
      model.learn_net = nn::init_params(sizes, act, root.split(2).next_u64());
      break;
    }
    case Architecture::epinet: {
      // trunk keeps its activation on the last layer: its output is phi
      std::vector<std::size_t> trunk_sizes;
      trunk_sizes.push_back(config.input_dim);
      trunk_sizes.insert(trunk_sizes.end(), config.hidden.begin(), config.hidden.end());
      model.base_trunk = nn::init_params(trunk_sizes, act, root.split(5).next_u64(),
                                         nn::InitScheme::kaiming_uniform, act);
      const std::size_t feat = config.hidden.back();
      model.base_head = nn::init_params({feat, 1}, act, root.split(6).next_u64());
      model.epi_prior = nn::init_params(
          component_sizes(config.input_dim, config.hidden, config.index_dim), act,
          root.split(3).next_u64());
      model.epi_learn = nn::init_params(
          component_sizes(feat + config.index_dim, config.hidden, config.index_dim),
          act, root.split(7).next_u64());
      Rng idx_rng = root.split(4);
      model.indices = Matrix(config.heads, config.index_dim);
      for (auto& v : model.indices.data) v = idx_rng.normal();
      break;
    }
  }
  return model;
}

namespace {

void check_input_dim(const EnsembleModel& model, const Matrix& inputs) {
  if (inputs.cols != model.config.input_dim) {
    throw std::invalid_argument("ensemble: input dim " + std::to_string(inputs.cols) +
                                " != " + std::to_string(model.config.input_dim));
  }
}

// Epinet forward pieces for one block of inputs, kept for the backward pass.
struct EpinetTrace {
  nn::ForwardTrace trunk_trace;
  Matrix base_out;   // N x 1
  Matrix prior_out;  // N x d
  nn::ForwardTrace learn_trace;  // over the stacked (K*N) x (F+d) input
};

const Matrix& epinet_phi(const EpinetTrace& t) { return t.trunk_trace.acts.back(); }

// Head outputs (K x N columns at col_offset) plus the trace.
EpinetTrace epinet_forward_block(const EnsembleModel& model, const Matrix& inputs,
                                 Matrix& out, std::size_t col_offset) {
  const auto& cfg = model.config;
  const std::size_t n = inputs.rows;
  const std::size_t d = cfg.index_dim;
  const std::size_t feat = cfg.hidden.back();

  EpinetTrace trace;
  trace.trunk_trace = nn::mlp_forward_trace(model.base_trunk, inputs);
  const Matrix& phi = epinet_phi(trace);
  trace.base_out = nn::mlp_forward(model.base_head, phi);
  trace.prior_out = nn::mlp_forward(model.epi_prior, inputs);

  Matrix stacked_in(cfg.heads * n, feat + d);
  for (std::size_t k = 0; k < cfg.heads; ++k) {
    const double* z = model.indices.data.data() + k * d;
    for (std::size_t i = 0; i < n; ++i) {
      double* row = stacked_in.data.data() + (k * n + i) * (feat + d);
      const double* phi_row = phi.data.data() + i * feat;
      std::copy(phi_row, phi_row + feat, row);
      std::copy(z, z + d, row + feat);
    }
  }
  trace.learn_trace = nn::mlp_forward_trace(model.epi_learn, stacked_in);
  const Matrix& stacked_out = trace.learn_trace.acts.back();

  for (std::size_t k = 0; k < cfg.heads; ++k) {
    const double* z = model.indices.data.data() + k * d;
    for (std::size_t i = 0; i < n; ++i) {
      double prior_term = 0.0;
      const double* prow = trace.prior_out.data.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) prior_term += prow[j] * z[j];
      double learn_term = 0.0;
      const double* trow = stacked_out.data.data() + (k * n + i) * d;
      for (std::size_t j = 0; j < d; ++j) learn_term += trow[j] * z[j];
      out.at(k, col_offset + i) =
          trace.base_out.data[i] + cfg.prior_scale * prior_term + learn_term;
    }
  }
  return trace;
}

}  // namespace

Matrix ensemble_forward(const EnsembleModel& model, const Matrix& inputs) {
  check_input_dim(model, inputs);
  const std::size_t n = inputs.rows;
  Matrix out(model.config.heads, n);

  switch (model.config.arch) {
    case Architecture::vanilla: {
      for (std::size_t k = 0; k < model.config.heads; ++k) {
        Matrix pred = nn::mlp_forward(model.members[k], inputs);
        for (std::size_t i = 0; i < n; ++i) out.at(k, i) = pred.data[i];
      }
      break;
    }
    case Architecture::shared_base: {
      Matrix prior = nn::mlp_forward(model.prior_net, inputs);  // N x K
      Matrix learn = nn::mlp_forward(model.learn_net, inputs);  // N x K
      const double v = model.config.prior_scale;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < model.config.heads; ++k) {
          out.at(k, i) = v * prior.at(i, k) + learn.at(i, k);
        }
      }
      break;
    }
    case Architecture::epinet: {
      // chunked to keep the stacked (K*N) x (F+d) buffer small
      const std::size_t chunk_rows = std::max<std::size_t>(1, 65536 / model.config.heads);
      for (std::size_t start = 0; start < n; start += chunk_rows) {
        const std::size_t len = std::min(chunk_rows, n - start);
        Matrix block(len, inputs.cols);
        std::copy(inputs.data.begin() + static_cast<std::ptrdiff_t>(start * inputs.cols),
                  inputs.data.begin() + static_cast<std::ptrdiff_t>((start + len) * inputs.cols),
                  block.data.begin());
        epinet_forward_block(model, block, out, start);
      }
      break;
    }
  }
  if (!out.all_finite()) {
    throw numeric_error("ensemble_forward: non-finite prediction");
  }
  return out;
}

std::vector<double> epinet_forward(const EnsembleModel& model,
                                   std::span<const double> z,
                                   const Matrix& inputs) {
  if (model.config.arch != Architecture::epinet) {
    throw std::invalid_argument("epinet_forward: model is not an epinet");
  }
  check_input_dim(model, inputs);
  if (z.size() != model.config.index_dim) {
    throw std::invalid_argument("epinet_forward: |z| != index_dim");
  }
  const std::size_t n = inputs.rows;
  const std::size_t d = model.config.index_dim;
  const std::size_t feat = model.config.hidden.back();

  Matrix phi = nn::mlp_forward(model.base_trunk, inputs);
  Matrix base_out = nn::mlp_forward(model.base_head, phi);
  Matrix prior_out = nn::mlp_forward(model.epi_prior, inputs);

  Matrix learn_in(n, feat + d);
  for (std::size_t i = 0; i < n; ++i) {
    double* row = learn_in.data.data() + i * (feat + d);
    const double* phi_row = phi.data.data() + i * feat;
    std::copy(phi_row, phi_row + feat, row);
    std::copy(z.begin(), z.end(), row + feat);
  }
  Matrix learn_out = nn::mlp_forward(model.epi_learn, learn_in);

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double prior_term = 0.0;
    double learn_term = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      prior_term += prior_out.at(i, j) * z[j];
      learn_term += learn_out.at(i, j) * z[j];
    }
    out[i] = base_out.data[i] + model.config.prior_scale * prior_term + learn_term;
  }
  return out;
}

namespace {

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double softplus(double x) {
  // log(1 + e^x), overflow-safe
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Loss of head outputs (K x B) against per-example targets; writes
// d(total)/d(pred) into upstream. The objective is the sum over heads of
// per-example mean losses; the returned history value is that sum / K.
double loss_and_upstream(const Matrix& preds, std::span<const double> targets,
                         TaskKind kind, Matrix& upstream) {
  const std::size_t heads = preds.rows;
  const std::size_t batch = preds.cols;
  const double inv_b = 1.0 / static_cast<double>(batch);
  double total = 0.0;
  for (std::size_t k = 0; k < heads; ++k) {
    for (std::size_t i = 0; i < batch; ++i) {
      const double p = preds.at(k, i);
      const double y = targets[i];
      if (kind == TaskKind::regression) {
        const double r = p - y;
        total += r * r * inv_b;
        upstream.at(k, i) = 2.0 * r * inv_b;
      } else {  // binary cross-entropy on logits
        total += (softplus(p) - p * y) * inv_b;
        upstream.at(k, i) = (sigmoid(p) - y) * inv_b;
      }
    }
  }
  return total / static_cast<double>(heads);
}

// Bradley-Terry pairwise loss; preds holds chosen scores in columns [0,B) and
// rejected scores in columns [B,2B).
double bt_loss_and_upstream(const Matrix& preds, Matrix& upstream) {
  const std::size_t heads = preds.rows;
  const std::size_t pairs = preds.cols / 2;
  const double inv_b = 1.0 / static_cast<double>(pairs);
  double total = 0.0;
  for (std::size_t k = 0; k < heads; ++k) {
    for (std::size_t i = 0; i < pairs; ++i) {
      const double delta = preds.at(k, i) - preds.at(k, pairs + i);
      total += softplus(-delta) * inv_b;
      const double g = (sigmoid(delta) - 1.0) * inv_b;
      upstream.at(k, i) = g;
      upstream.at(k, pairs + i) = -g;
    }
  }
  return total / static_cast<double>(heads);
}

struct TrainState {
  std::vector<nn::OptimizerState> opts;
};

TrainState make_train_state(EnsembleModel& model, const nn::OptimizerConfig& oc) {
  TrainState ts;
  switch (model.config.arch) {
    case Architecture::vanilla:
      for (auto& m : model.members) ts.opts.push_back(nn::OptimizerState::create(oc, m));
      break;
    case Architecture::shared_base:
      ts.opts.push_back(nn::OptimizerState::create(oc, model.learn_net));
      break;
    case Architecture::epinet:
      ts.opts.push_back(nn::OptimizerState::create(oc, model.base_trunk));
      ts.opts.push_back(nn::OptimizerState::create(oc, model.base_head));
      ts.opts.push_back(nn::OptimizerState::create(oc, model.epi_learn));
      break;
  }
  return ts;
}

struct BatchLoss {
  TaskKind loss;
  std::span<const double> targets;  // empty for preference batches

  double operator()(const Matrix& preds, Matrix& upstream) const {
    return loss == TaskKind::preference ? bt_loss_and_upstream(preds, upstream)
                                        : loss_and_upstream(preds, targets, loss, upstream);
  }
};

// One fused forward/backward/update step; returns the mean loss.
double train_step(EnsembleModel& model, TrainState& ts, const Matrix& batch_x,
                  const BatchLoss& loss_fn, std::size_t step) {
  const auto& cfg = model.config;
  const std::size_t b = batch_x.rows;
  double mean_loss = 0.0;

  switch (cfg.arch) {
    case Architecture::vanilla: {
      // heads are independent: loss decomposes per member
      Matrix pred_k(1, b);
      Matrix up_k(1, b);
      for (std::size_t k = 0; k < cfg.heads; ++k) {
        auto trace = nn::mlp_forward_trace(model.members[k], batch_x);
        for (std::size_t i = 0; i < b; ++i) pred_k.data[i] = trace.acts.back().data[i];
        mean_loss += loss_fn(pred_k, up_k);
        Matrix u(b, 1);
        for (std::size_t i = 0; i < b; ++i) u.data[i] = up_k.data[i];
        auto back = nn::mlp_backward_trace(model.members[k], trace, u);
        nn::optimizer_step(ts.opts[k], model.members[k], back.param_grads);
      }
      mean_loss /= static_cast<double>(cfg.heads);
      break;
    }
    case Architecture::shared_base: {
      auto trace = nn::mlp_forward_trace(model.learn_net, batch_x);
      Matrix prior = nn::mlp_forward(model.prior_net, batch_x);
      const Matrix& learn = trace.acts.back();
      Matrix preds(cfg.heads, b);
      const double v = cfg.prior_scale;
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t k = 0; k < cfg.heads; ++k) {
          preds.at(k, i) = v * prior.at(i, k) + learn.at(i, k);
        }
      }
      Matrix upstream(cfg.heads, b);
      mean_loss = loss_fn(preds, upstream);
      Matrix u = nn::transpose(upstream);  // B x K matches learn_net output
      auto back = nn::mlp_backward_trace(model.learn_net, trace, u);
      nn::optimizer_step(ts.opts[0], model.learn_net, back.param_grads);
      break;
    }
    case Architecture::epinet: {
      Matrix preds(cfg.heads, b);
      EpinetTrace trace = epinet_forward_block(model, batch_x, preds, 0);
      Matrix upstream(cfg.heads, b);
      mean_loss = loss_fn(preds, upstream);

      const std::size_t d = cfg.index_dim;
      const std::size_t feat = cfg.hidden.back();
      // d(total)/d(learn_out[(k,i), j]) = upstream_ki * z_kj
      Matrix stacked_up(cfg.heads * b, d);
      for (std::size_t k = 0; k < cfg.heads; ++k) {
        const double* z = model.indices.data.data() + k * d;
        for (std::size_t i = 0; i < b; ++i) {
          const double g = upstream.at(k, i);
          double* row = stacked_up.data.data() + (k * b + i) * d;
          for (std::size_t j = 0; j < d; ++j) row[j] = g * z[j];
        }
      }
      auto learn_back =
          nn::mlp_backward_trace(model.epi_learn, trace.learn_trace, stacked_up);

      // the base output collects every head's upstream
      Matrix base_up(b, 1);
      for (std::size_t i = 0; i < b; ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < cfg.heads; ++k) acc += upstream.at(k, i);
        base_up.data[i] = acc;
      }
      auto head_back = nn::mlp_backward(model.base_head, epinet_phi(trace), base_up);

      // phi receives grads from the base head and from the phi slice of the
      // trainable epinet input
      Matrix phi_grads = std::move(head_back.input_grads);  // B x F
      for (std::size_t k = 0; k < cfg.heads; ++k) {
        for (std::size_t i = 0; i < b; ++i) {
          const double* row =
              learn_back.input_grads.data.data() + (k * b + i) * (feat + d);
          double* dst = phi_grads.data.data() + i * feat;
          for (std::size_t j = 0; j < feat; ++j) dst[j] += row[j];
        }
      }
      auto trunk_back =
          nn::mlp_backward_trace(model.base_trunk, trace.trunk_trace, phi_grads);

      nn::optimizer_step(ts.opts[0], model.base_trunk, trunk_back.param_grads);
      nn::optimizer_step(ts.opts[1], model.base_head, head_back.param_grads);
      nn::optimizer_step(ts.opts[2], model.epi_learn, learn_back.param_grads);
      break;
    }
  }
  if (!std::isfinite(mean_loss)) {
    throw numeric_error("train_ensemble: non-finite loss at step " +
                        std::to_string(step));
  }
  return mean_loss;
}

}  // namespace

std::vector<double> train_ensemble(EnsembleModel& model, const Dataset& data,
                                   const TrainConfig& tc) {
  data.validate();
  if (tc.batch_size == 0) throw std::invalid_argument("train_ensemble: batch_size 0");
  const bool pairwise = tc.loss == TaskKind::preference;
  if (pairwise != (data.kind == TaskKind::preference)) {
    throw std::invalid_argument("train_ensemble: loss kind incompatible with data kind");
  }
  std::vector<double> history;
  if (tc.steps == 0) return history;
  const std::size_t n = data.size();
  if (n == 0) throw std::invalid_argument("train_ensemble: empty dataset");
  if (data.feature_dim() != model.config.input_dim) {
    throw std::invalid_argument("train_ensemble: feature dim mismatch");
  }

  history.reserve(tc.steps);
  TrainState ts = make_train_state(model, tc.optimizer);
  Rng rng(tc.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bsz = std::min(tc.batch_size, n);

  Matrix batch_x;
  std::vector<double> batch_y(bsz);
  for (std::size_t step = 0; step < tc.steps; ++step) {
    // partial Fisher-Yates: the first bsz entries become the batch
    for (std::size_t i = 0; i < bsz; ++i) {
      const std::size_t j = i + rng.uniform_index(n - i);
      std::swap(order[i], order[j]);
    }
    if (!pairwise) {
      batch_x = Matrix(bsz, data.feature_dim());
      for (std::size_t i = 0; i < bsz; ++i) {
        const auto src = data.features.row(order[i]);
        std::copy(src.begin(), src.end(), batch_x.row(i).begin());
        batch_y[i] = data.targets[order[i]];
      }
    } else {
      batch_x = Matrix(2 * bsz, data.feature_dim());
      for (std::size_t i = 0; i < bsz; ++i) {
        const auto [c, r] = data.pairs[order[i]];
        const auto cs = data.features.row(c);
        const auto rs = data.features.row(r);
        std::copy(cs.begin(), cs.end(), batch_x.row(i).begin());
        std::copy(rs.begin(), rs.end(), batch_x.row(bsz + i).begin());
      }
    }
    BatchLoss loss_fn{tc.loss, std::span<const double>(batch_y.data(), bsz)};
    history.push_back(train_step(model, ts, batch_x, loss_fn, step));
  }
  return history;
}

std::vector<double> disagreement(const EnsembleModel& model, const Matrix& inputs) {
  Matrix preds = ensemble_forward(model, inputs);
  const std::size_t heads = preds.rows;
  std::vector<double> var(preds.cols, 0.0);
  for (std::size_t i = 0; i < preds.cols; ++i) {
    double mean = 0.0;
    for (std::size_t k = 0; k < heads; ++k) mean += preds.at(k, i);
    mean /= static_cast<double>(heads);
    double acc = 0.0;
    for (std::size_t k = 0; k < heads; ++k) {
      const double d = preds.at(k, i) - mean;
      acc += d * d;
    }
    var[i] = acc / static_cast<double>(heads);
  }
  return var;
}

std::vector<nn::MlpParams const*> frozen_components(const EnsembleModel& model) {
  switch (model.config.arch) {
    case Architecture::vanilla: return {};
    case Architecture::shared_base: return {&model.prior_net};
    case Architecture::epinet: return {&model.epi_prior};
  }
  return {};
}

}  // namespace hyre
