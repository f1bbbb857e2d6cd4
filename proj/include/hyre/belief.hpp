#pragma once

#include <span>
#include <string>
#include <vector>

#include "hyre/dataset.hpp"
#include "hyre/ensemble.hpp"

namespace hyre {

// Simplex belief over the K ensemble members, parameterized by the cumulative
// per-head losses on adaptation data. Weights are derived on demand as
// softmax(-L/T + log_prior); with T = 1 and a zero log-prior this is exactly
// the softmax of negative cumulative losses.
struct BeliefState {
  std::size_t heads = 0;                  // K
  std::vector<double> cumulative_losses;  // L_k >= 0
  double temperature = 1.0;               // T > 0
  std::vector<double> log_prior;          // default all zero = uniform
};

BeliefState init_belief(std::size_t heads);

enum class LossKind { zero_one, squared_error, preference_error };

LossKind parse_loss_kind(const std::string& tag);
const char* loss_kind_name(LossKind k);

struct PointLoss {
  LossKind kind = LossKind::zero_one;
  // zero_one and preference_error count a prediction exactly at the decision
  // threshold as an error
};

// zero_one: prediction is a logit thresholded at 0 against target in {0,1};
// squared_error: (prediction - target)^2
double point_loss(const PointLoss& loss, double prediction, double target);

// preference_error: 0 iff chosen_score > rejected_score strictly
double preference_loss(const PointLoss& loss, double chosen_score,
                       double rejected_score);

// L_k += losses[k]; entries must be finite and >= 0
BeliefState accumulate(BeliefState belief, std::span<const double> per_head_losses);

// Weights on the K-simplex, computed with max-subtraction for stability.
std::vector<double> compute_weights(const BeliefState& belief);

// posterior_k proportional to exp(-loss_k) * prior_k, normalized. The prior
// must lie on the simplex within 1e-9.
std::vector<double> generalized_update(std::span<const double> prior_weights,
                                       std::span<const double> losses);

enum class Combine {
  raw_outputs,   // convex combination of head outputs (regression, logits)
  probabilities  // sigmoid each head first, then combine (classification)
};

std::vector<double> weighted_predict(const EnsembleModel& model,
                                     const BeliefState& belief,
                                     const nn::Matrix& inputs,
                                     Combine mode = Combine::raw_outputs);

// Convex combination of precomputed head values (K x N) under weights.
std::vector<double> weighted_combine(const nn::Matrix& head_values,
                                     std::span<const double> weights);

// Loss of every head on one labeled point, given the heads' predictions.
std::vector<double> per_head_losses(std::span<const double> head_predictions,
                                    const PointLoss& loss, double target);

// Cumulative loss of every head over a labeled dataset.
std::vector<double> per_head_dataset_losses(const EnsembleModel& model,
                                            const Dataset& data,
                                            const PointLoss& loss);

// argmin over heads of cumulative loss; ties broken by lowest index.
std::size_t best_head(const EnsembleModel& model, const Dataset& labeled_eval,
                      const PointLoss& loss);

// Plain-text key-value record for session resume.
std::string serialize_belief(const BeliefState& belief);
BeliefState parse_belief(const std::string& text);

}  // namespace hyre
