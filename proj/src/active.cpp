#include "hyre/active.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "hyre/errors.hpp"
#include "hyre/rng.hpp"

namespace hyre::active {

Criterion parse_criterion(const std::string& tag) {
  if (tag == "entropy") return Criterion::entropy;
  if (tag == "bald") return Criterion::bald;
  if (tag == "variance") return Criterion::variance;
  if (tag == "random") return Criterion::random_pick;
  throw std::invalid_argument("unknown criterion: " + tag);
}

const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::entropy: return "entropy";
    case Criterion::bald: return "bald";
    case Criterion::variance: return "variance";
    case Criterion::random_pick: return "random";
  }
  return "?";
}

Pool::Pool(nn::Matrix inputs, std::vector<double> oracle_labels, std::size_t budget)
    : inputs_(std::move(inputs)),
      labels_(std::move(oracle_labels)),
      queried_flags_(inputs_.rows, 0),
      remaining_(budget) {
  if (labels_.size() != inputs_.rows) {
    throw std::invalid_argument("Pool: label count != input rows");
  }
  if (budget > inputs_.rows) {
    throw std::invalid_argument("Pool: budget exceeds pool size");
  }
}

std::vector<std::size_t> Pool::unqueried() const {
  std::vector<std::size_t> out;
  out.reserve(inputs_.rows - order_.size());
  for (std::size_t i = 0; i < inputs_.rows; ++i) {
    if (!queried_flags_[i]) out.push_back(i);
  }
  return out;
}

double Pool::reveal(std::size_t index) {
  if (index >= inputs_.rows) throw std::invalid_argument("Pool: index out of range");
  if (remaining_ == 0) throw budget_exhausted("Pool: query budget exhausted");
  if (queried_flags_[index]) {
    throw std::invalid_argument("Pool: index " + std::to_string(index) +
                                " already queried");
  }
  queried_flags_[index] = 1;
  order_.push_back(index);
  remaining_ -= 1;
  return labels_[index];
}

namespace {

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// binary entropy in nats with 0*log(0) := 0
double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw numeric_error("entropy: probability outside [0,1]");
  }
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log(1.0 - p);
  return h;
}

nn::Matrix head_probabilities(const EnsembleModel& model, const nn::Matrix& inputs) {
  nn::Matrix preds = ensemble_forward(model, inputs);
  for (auto& v : preds.data) v = sigmoid(v);
  return preds;
}

}  // namespace

std::vector<double> entropy_of_probabilities(const nn::Matrix& probs,
                                             std::span<const double> weights) {
  if (weights.size() != probs.rows) {
    throw std::invalid_argument("entropy_of_probabilities: K mismatch");
  }
  std::vector<double> out(probs.cols);
  for (std::size_t i = 0; i < probs.cols; ++i) {
    double mean = 0.0;
    for (std::size_t k = 0; k < probs.rows; ++k) mean += weights[k] * probs.at(k, i);
    out[i] = binary_entropy(mean);
  }
  return out;
}

std::vector<double> bald_of_probabilities(const nn::Matrix& probs,
                                          std::span<const double> weights) {
  if (weights.size() != probs.rows) {
    throw std::invalid_argument("bald_of_probabilities: K mismatch");
  }
  std::vector<double> out(probs.cols);
  for (std::size_t i = 0; i < probs.cols; ++i) {
    double mean = 0.0;
    double member_entropy = 0.0;
    for (std::size_t k = 0; k < probs.rows; ++k) {
      const double p = probs.at(k, i);
      mean += weights[k] * p;
      member_entropy += weights[k] * binary_entropy(p);
    }
    out[i] = binary_entropy(mean) - member_entropy;
  }
  return out;
}

std::vector<double> variance_of_outputs(const nn::Matrix& outputs,
                                        std::span<const double> weights) {
  if (weights.size() != outputs.rows) {
    throw std::invalid_argument("variance_of_outputs: K mismatch");
  }
  std::vector<double> out(outputs.cols);
  for (std::size_t i = 0; i < outputs.cols; ++i) {
    double mean = 0.0;
    for (std::size_t k = 0; k < outputs.rows; ++k) mean += weights[k] * outputs.at(k, i);
    double var = 0.0;
    for (std::size_t k = 0; k < outputs.rows; ++k) {
      const double d = outputs.at(k, i) - mean;
      var += weights[k] * d * d;
    }
    out[i] = var;
  }
  return out;
}

std::vector<double> score_entropy(const EnsembleModel& model,
                                  const BeliefState& belief,
                                  const nn::Matrix& inputs) {
  return entropy_of_probabilities(head_probabilities(model, inputs),
                                  compute_weights(belief));
}

std::vector<double> score_bald(const EnsembleModel& model, const BeliefState& belief,
                               const nn::Matrix& inputs) {
  return bald_of_probabilities(head_probabilities(model, inputs),
                               compute_weights(belief));
}

std::vector<double> score_variance(const EnsembleModel& model,
                                   const BeliefState& belief,
                                   const nn::Matrix& inputs) {
  return variance_of_outputs(ensemble_forward(model, inputs),
                             compute_weights(belief));
}

namespace {

struct ScoredPick {
  std::size_t index;
  double score;
};

ScoredPick pick_query(const Pool& pool, const QueryCriterion& criterion,
                      const EnsembleModel& model, const BeliefState& belief,
                      std::uint64_t random_round) {
  const auto candidates = pool.unqueried();
  if (candidates.empty()) throw budget_exhausted("select_query: pool exhausted");
  if (pool.remaining_budget() == 0) {
    throw budget_exhausted("select_query: query budget exhausted");
  }
  if (criterion.kind == Criterion::random_pick) {
    // one independent draw per round keeps selection deterministic under the
    // criterion seed regardless of prior queries
    Rng rng = Rng(criterion.seed).split(random_round);
    return {candidates[rng.uniform_index(candidates.size())], 0.0};
  }

  nn::Matrix subset(candidates.size(), pool.inputs().cols);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto src = pool.inputs().row(candidates[i]);
    std::copy(src.begin(), src.end(), subset.row(i).begin());
  }
  std::vector<double> scores;
  switch (criterion.kind) {
    case Criterion::entropy: scores = score_entropy(model, belief, subset); break;
    case Criterion::bald: scores = score_bald(model, belief, subset); break;
    case Criterion::variance: scores = score_variance(model, belief, subset); break;
    case Criterion::random_pick: break;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return {candidates[best], scores[best]};
}

}  // namespace

std::size_t select_query(const Pool& pool, const QueryCriterion& criterion,
                         const EnsembleModel& model, const BeliefState& belief) {
  return pick_query(pool, criterion, model, belief, pool.query_order().size()).index;
}

AdaptationResult run_adaptation(const EnsembleModel& model, Pool& pool,
                                std::size_t budget, const QueryCriterion& criterion,
                                const PointLoss& loss) {
  if (budget > pool.size()) {
    throw std::invalid_argument("run_adaptation: budget exceeds pool size");
  }
  AdaptationResult result;
  result.belief = init_belief(model.config.heads);
  if (budget == 0) return result;

  for (std::size_t it = 0; it < budget; ++it) {
    const ScoredPick pick = pick_query(pool, criterion, model, result.belief, it);
    const double label = pool.reveal(pick.index);
    result.log.push_back({it, pick.index, pick.score, label});

    // per-head scores are recomputed over the whole revealed set Q
    BeliefState fresh = init_belief(model.config.heads);
    for (const auto& rec : result.log) {
      nn::Matrix x(1, pool.inputs().cols);
      const auto src = pool.inputs().row(rec.pool_index);
      std::copy(src.begin(), src.end(), x.data.begin());
      nn::Matrix preds = ensemble_forward(model, x);
      fresh = accumulate(fresh, per_head_losses(
                                    std::span<const double>(preds.data), loss,
                                    rec.revealed_label));
    }
    result.belief = std::move(fresh);
  }
  return result;
}

std::string query_log_csv(const std::vector<QueryRecord>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,pool_index,criterion_score,revealed_label\n";
  for (const auto& rec : log) {
    out << rec.iteration << "," << rec.pool_index << "," << rec.criterion_score
        << "," << rec.revealed_label << "\n";
  }
  return out.str();
}

}  // namespace hyre::active
