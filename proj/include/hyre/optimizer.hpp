#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyre/mlp.hpp"

namespace hyre::nn {

enum class OptKind { sgd, adam };

OptKind parse_opt_kind(const std::string& tag);

struct OptimizerConfig {
  OptKind kind = OptKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled, applied as p -= lr*wd*p
};

// Moment accumulators mirror the parameter shapes exactly.
struct OptimizerState {
  OptimizerConfig config;
  std::uint64_t step = 0;
  MlpParams first_moment;   // adam only
  MlpParams second_moment;  // adam only

  static OptimizerState create(const OptimizerConfig& config,
                               const MlpParams& params);
};

// One update step in place. Throws numeric_error on non-finite gradients.
void optimizer_step(OptimizerState& state, MlpParams& params,
                    const MlpParams& grads);

}  // namespace hyre::nn
