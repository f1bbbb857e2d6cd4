#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyre/dataset.hpp"
#include "hyre/matrix.hpp"
#include "hyre/mlp.hpp"
#include "hyre/optimizer.hpp"

namespace hyre {

enum class Architecture { vanilla, shared_base, epinet };

Architecture parse_architecture(const std::string& tag);
const char* architecture_name(Architecture a);

struct EnsembleConfig {
  std::size_t heads = 100;  // K
  Architecture arch = Architecture::shared_base;
  double prior_scale = 1.0;               // v
  std::size_t index_dim = 10;             // epinet only
  std::size_t input_dim = 0;              // D
  std::vector<std::size_t> hidden = {128};  // per-component hidden sizes
  nn::Activation activation = nn::Activation::relu;
  std::uint64_t seed = 0;

  void validate() const;
};

// K scalar-output heads in one of three parameterizations.
//
//   vanilla      K independent nets D -> 1
//   shared_base  frozen prior net and learnable net, each D -> K;
//                head k is v*prior_k(x) + learn_k(x)
//   epinet       base trunk D -> F (features phi) plus affine head F -> 1,
//                frozen prior net D -> d and learnable net (F+d) -> d, both
//                contracted with a fixed per-head index z_k in R^d
//
// Frozen components never change after build_ensemble.
struct EnsembleModel {
  EnsembleConfig config;

  std::vector<nn::MlpParams> members;  // vanilla

  nn::MlpParams prior_net;  // shared_base, frozen
  nn::MlpParams learn_net;  // shared_base

  nn::MlpParams base_trunk;  // epinet
  nn::MlpParams base_head;   // epinet
  nn::MlpParams epi_prior;   // epinet, frozen
  nn::MlpParams epi_learn;   // epinet
  nn::Matrix indices;        // epinet, K x d, frozen
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 64;
  nn::OptimizerConfig optimizer;
  TaskKind loss = TaskKind::regression;  // mse | bce | bradley-terry
  std::uint64_t seed = 0;
};

EnsembleModel build_ensemble(const EnsembleConfig& config);

// Row k holds head k's prediction for every input (K x N).
nn::Matrix ensemble_forward(const EnsembleModel& model, const nn::Matrix& inputs);

// Epinet output at an arbitrary epistemic index (length N).
std::vector<double> epinet_forward(const EnsembleModel& model,
                                   std::span<const double> z,
                                   const nn::Matrix& inputs);

// Gradient steps on learnable components only; returns per-step mean loss
// (averaged over batch and heads). Throws numeric_error naming the step if the
// loss leaves the reals.
std::vector<double> train_ensemble(EnsembleModel& model, const Dataset& data,
                                   const TrainConfig& tc);

// Per-input population variance of the K head predictions.
std::vector<double> disagreement(const EnsembleModel& model,
                                 const nn::Matrix& inputs);

// Serialized frozen blocks, used for the freeze byte-stability checks.
std::vector<nn::MlpParams const*> frozen_components(const EnsembleModel& model);

}  // namespace hyre
