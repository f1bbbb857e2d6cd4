#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyre/belief.hpp"
#include "hyre/ensemble.hpp"
#include "hyre/matrix.hpp"

namespace hyre::active {

enum class Criterion { entropy, bald, variance, random_pick };

Criterion parse_criterion(const std::string& tag);
const char* criterion_name(Criterion c);

struct QueryCriterion {
  Criterion kind = Criterion::random_pick;
  std::uint64_t seed = 0;  // used by random_pick only
};

// Unlabeled inputs with data-backed oracle labels revealed one query at a
// time, under a fixed query budget.
class Pool {
 public:
  Pool(nn::Matrix inputs, std::vector<double> oracle_labels, std::size_t budget);

  const nn::Matrix& inputs() const { return inputs_; }
  std::size_t size() const { return inputs_.rows; }
  std::size_t remaining_budget() const { return remaining_; }
  bool is_queried(std::size_t index) const { return queried_flags_[index]; }
  const std::vector<std::size_t>& query_order() const { return order_; }
  std::vector<std::size_t> unqueried() const;

  // Reveals the oracle label; throws budget_exhausted when the budget is
  // spent and invalid_argument on duplicate queries.
  double reveal(std::size_t index);

 private:
  nn::Matrix inputs_;
  std::vector<double> labels_;
  std::vector<char> queried_flags_;
  std::vector<std::size_t> order_;
  std::size_t remaining_;
};

// Binary entropy (nats) of the weighted mean head probability per input.
// Heads emit logits; weights come from the belief.
std::vector<double> score_entropy(const EnsembleModel& model,
                                  const BeliefState& belief,
                                  const nn::Matrix& inputs);

// Mixture entropy minus weighted mean member entropy per input.
std::vector<double> score_bald(const EnsembleModel& model,
                               const BeliefState& belief,
                               const nn::Matrix& inputs);

// Weighted population variance of head outputs per input.
std::vector<double> score_variance(const EnsembleModel& model,
                                   const BeliefState& belief,
                                   const nn::Matrix& inputs);

// Same criteria on a precomputed matrix of head probabilities / outputs
// (K x N) under explicit weights.
std::vector<double> entropy_of_probabilities(const nn::Matrix& probs,
                                             std::span<const double> weights);
std::vector<double> bald_of_probabilities(const nn::Matrix& probs,
                                          std::span<const double> weights);
std::vector<double> variance_of_outputs(const nn::Matrix& outputs,
                                        std::span<const double> weights);

// Argmax of the criterion over unqueried pool inputs; ties break to the
// lowest index. random_pick draws uniformly from the unqueried set.
std::size_t select_query(const Pool& pool, const QueryCriterion& criterion,
                         const EnsembleModel& model, const BeliefState& belief);

struct QueryRecord {
  std::size_t iteration;
  std::size_t pool_index;
  double criterion_score;
  double revealed_label;
};

struct AdaptationResult {
  BeliefState belief;
  std::vector<QueryRecord> log;
};

// The budgeted select/reveal/reweight loop. Per-head scores are recomputed
// over the whole revealed set each iteration. With random_pick this realizes
// the few-shot (pre-labeled) mode.
AdaptationResult run_adaptation(const EnsembleModel& model, Pool& pool,
                                std::size_t budget, const QueryCriterion& criterion,
                                const PointLoss& loss);

std::string query_log_csv(const std::vector<QueryRecord>& log);

}  // namespace hyre::active
