#include "hyre/belief.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "hyre/errors.hpp"

namespace hyre {

BeliefState init_belief(std::size_t heads) {
  if (heads == 0) throw std::invalid_argument("init_belief: K must be >= 1");
  BeliefState b;
  b.heads = heads;
  b.cumulative_losses.assign(heads, 0.0);
  b.log_prior.assign(heads, 0.0);
  return b;
}

LossKind parse_loss_kind(const std::string& tag) {
  if (tag == "zero_one") return LossKind::zero_one;
  if (tag == "squared_error") return LossKind::squared_error;
  if (tag == "preference_error") return LossKind::preference_error;
  throw std::invalid_argument("unknown loss kind: " + tag);
}

const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::zero_one: return "zero_one";
    case LossKind::squared_error: return "squared_error";
    case LossKind::preference_error: return "preference_error";
  }
  return "?";
}

double point_loss(const PointLoss& loss, double prediction, double target) {
  if (!std::isfinite(prediction) || !std::isfinite(target)) {
    throw std::invalid_argument("point_loss: non-finite input");
  }
  switch (loss.kind) {
    case LossKind::zero_one: {
      if (target != 0.0 && target != 1.0) {
        throw std::invalid_argument("point_loss: zero_one target must be 0 or 1");
      }
      if (prediction > 0.0) return target == 1.0 ? 0.0 : 1.0;
      if (prediction < 0.0) return target == 0.0 ? 0.0 : 1.0;
      return 1.0;  // exactly at the threshold counts as an error
    }
    case LossKind::squared_error: {
      const double r = prediction - target;
      return r * r;
    }
    case LossKind::preference_error:
      throw std::invalid_argument("point_loss: preference_error needs a score pair");
  }
  return 0.0;
}

double preference_loss(const PointLoss& loss, double chosen_score,
                       double rejected_score) {
  if (loss.kind != LossKind::preference_error) {
    throw std::invalid_argument("preference_loss: kind is not preference_error");
  }
  if (!std::isfinite(chosen_score) || !std::isfinite(rejected_score)) {
    throw std::invalid_argument("preference_loss: non-finite score");
  }
  return chosen_score > rejected_score ? 0.0 : 1.0;
}

BeliefState accumulate(BeliefState belief, std::span<const double> per_head_losses) {
  if (per_head_losses.size() != belief.heads) {
    throw std::invalid_argument("accumulate: expected " + std::to_string(belief.heads) +
                                " losses, got " + std::to_string(per_head_losses.size()));
  }
  for (double v : per_head_losses) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("accumulate: losses must be finite and >= 0");
    }
  }
  for (std::size_t k = 0; k < belief.heads; ++k) {
    belief.cumulative_losses[k] += per_head_losses[k];
  }
  return belief;
}

std::vector<double> compute_weights(const BeliefState& belief) {
  if (belief.heads == 0 || belief.temperature <= 0.0) {
    throw std::invalid_argument("compute_weights: invalid belief");
  }
  std::vector<double> logits(belief.heads);
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < belief.heads; ++k) {
    logits[k] = -belief.cumulative_losses[k] / belief.temperature + belief.log_prior[k];
    max_logit = std::max(max_logit, logits[k]);
  }
  double norm = 0.0;
  for (auto& v : logits) {
    v = std::exp(v - max_logit);
    norm += v;
  }
  for (auto& v : logits) v /= norm;
  return logits;
}

std::vector<double> generalized_update(std::span<const double> prior_weights,
                                       std::span<const double> losses) {
  if (prior_weights.size() != losses.size() || prior_weights.empty()) {
    throw std::invalid_argument("generalized_update: size mismatch");
  }
  double sum = 0.0;
  for (double p : prior_weights) {
    if (!std::isfinite(p) || p < 0.0) {
      throw std::invalid_argument("generalized_update: prior not on the simplex");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("generalized_update: prior sums to " + std::to_string(sum));
  }
  for (double l : losses) {
    if (!std::isfinite(l)) {
      throw std::invalid_argument("generalized_update: non-finite loss");
    }
  }
  // work in log space; prior zeros stay zero
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<double> logp(prior_weights.size());
  double max_logp = neg_inf;
  for (std::size_t k = 0; k < prior_weights.size(); ++k) {
    logp[k] = prior_weights[k] > 0.0 ? std::log(prior_weights[k]) - losses[k] : neg_inf;
    max_logp = std::max(max_logp, logp[k]);
  }
  if (max_logp == neg_inf) {
    throw std::invalid_argument("generalized_update: prior has no support");
  }
  double norm = 0.0;
  for (auto& v : logp) {
    v = v == neg_inf ? 0.0 : std::exp(v - max_logp);
    norm += v;
  }
  for (auto& v : logp) v /= norm;
  return logp;
}

std::vector<double> weighted_combine(const nn::Matrix& head_values,
                                     std::span<const double> weights) {
  if (weights.size() != head_values.rows) {
    throw std::invalid_argument("weighted_combine: K mismatch");
  }
  std::vector<double> out(head_values.cols, 0.0);
  for (std::size_t k = 0; k < head_values.rows; ++k) {
    const double w = weights[k];
    if (w == 0.0) continue;
    const double* row = head_values.data.data() + k * head_values.cols;
    for (std::size_t i = 0; i < head_values.cols; ++i) out[i] += w * row[i];
  }
  return out;
}

namespace {

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

std::vector<double> weighted_predict(const EnsembleModel& model,
                                     const BeliefState& belief,
                                     const nn::Matrix& inputs, Combine mode) {
  if (belief.heads != model.config.heads) {
    throw std::invalid_argument("weighted_predict: belief K != model K");
  }
  nn::Matrix preds = ensemble_forward(model, inputs);
  if (mode == Combine::probabilities) {
    for (auto& v : preds.data) v = sigmoid(v);
  }
  return weighted_combine(preds, compute_weights(belief));
}

std::vector<double> per_head_losses(std::span<const double> head_predictions,
                                    const PointLoss& loss, double target) {
  std::vector<double> out(head_predictions.size());
  for (std::size_t k = 0; k < head_predictions.size(); ++k) {
    out[k] = point_loss(loss, head_predictions[k], target);
  }
  return out;
}

std::vector<double> per_head_dataset_losses(const EnsembleModel& model,
                                            const Dataset& data,
                                            const PointLoss& loss) {
  data.validate();
  if (data.size() == 0) {
    throw std::invalid_argument("per_head_dataset_losses: empty dataset");
  }
  const std::size_t heads = model.config.heads;
  std::vector<double> total(heads, 0.0);
  nn::Matrix preds = ensemble_forward(model, data.features);
  if (data.kind == TaskKind::preference) {
    if (loss.kind != LossKind::preference_error) {
      throw std::invalid_argument("per_head_dataset_losses: preference data needs preference_error");
    }
    for (const auto& [c, r] : data.pairs) {
      for (std::size_t k = 0; k < heads; ++k) {
        total[k] += preference_loss(loss, preds.at(k, c), preds.at(k, r));
      }
    }
  } else {
    if (loss.kind == LossKind::preference_error) {
      throw std::invalid_argument("per_head_dataset_losses: pointwise data, pairwise loss");
    }
    for (std::size_t i = 0; i < data.targets.size(); ++i) {
      for (std::size_t k = 0; k < heads; ++k) {
        total[k] += point_loss(loss, preds.at(k, i), data.targets[i]);
      }
    }
  }
  return total;
}

std::size_t best_head(const EnsembleModel& model, const Dataset& labeled_eval,
                      const PointLoss& loss) {
  const auto totals = per_head_dataset_losses(model, labeled_eval, loss);
  std::size_t best = 0;
  for (std::size_t k = 1; k < totals.size(); ++k) {
    if (totals[k] < totals[best]) best = k;
  }
  return best;
}

std::string serialize_belief(const BeliefState& belief) {
  std::ostringstream out;
  out.precision(17);
  out << "k = " << belief.heads << "\n";
  out << "temperature = " << belief.temperature << "\n";
  out << "cumulative_losses =";
  for (double v : belief.cumulative_losses) out << " " << v;
  out << "\nlog_prior =";
  for (double v : belief.log_prior) out << " " << v;
  out << "\n";
  return out.str();
}

BeliefState parse_belief(const std::string& text) {
  BeliefState belief;
  std::istringstream in(text);
  std::string line;
  bool have_k = false;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    std::istringstream values(line.substr(eq + 1));
    if (key == "k") {
      values >> belief.heads;
      have_k = true;
    } else if (key == "temperature") {
      values >> belief.temperature;
    } else if (key == "cumulative_losses" || key == "log_prior") {
      std::vector<double> v;
      double x;
      while (values >> x) v.push_back(x);
      (key == "cumulative_losses" ? belief.cumulative_losses : belief.log_prior) =
          std::move(v);
    } else {
      throw format_error("belief record: unknown key '" + key + "'");
    }
  }
  if (!have_k || belief.heads == 0 ||
      belief.cumulative_losses.size() != belief.heads ||
      belief.log_prior.size() != belief.heads || belief.temperature <= 0.0) {
    throw format_error("belief record: missing or inconsistent fields");
  }
  for (double v : belief.cumulative_losses) {
    if (!std::isfinite(v) || v < 0.0) {
      throw format_error("belief record: invalid cumulative loss");
    }
  }
  return belief;
}

}  // namespace hyre
