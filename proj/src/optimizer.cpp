#include "hyre/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "hyre/errors.hpp"

namespace hyre::nn {

OptKind parse_opt_kind(const std::string& tag) {
  if (tag == "sgd") return OptKind::sgd;
  if (tag == "adam") return OptKind::adam;
  throw std::invalid_argument("unknown optimizer: " + tag);
}

OptimizerState OptimizerState::create(const OptimizerConfig& config,
                                      const MlpParams& params) {
  OptimizerState state;
  state.config = config;
  if (config.kind == OptKind::adam) {
    state.first_moment = params;
    state.first_moment.fill(0.0);
    state.second_moment = state.first_moment;
  }
  return state;
}

namespace {

void sgd_update(double lr, double wd, std::span<double> p,
                std::span<const double> g) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] -= lr * (g[i] + wd * p[i]);
  }
}

void adam_update(const OptimizerConfig& c, double bc1, double bc2,
                 std::span<double> p, std::span<const double> g,
                 std::span<double> m, std::span<double> v) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= c.learning_rate * (mhat / (std::sqrt(vhat) + c.epsilon) +
                               c.weight_decay * p[i]);
  }
}

}  // namespace

void optimizer_step(OptimizerState& state, MlpParams& params,
                    const MlpParams& grads) {
  if (!params.same_shape(grads)) {
    throw std::invalid_argument("optimizer_step: grad shape mismatch");
  }
  if (!grads.all_finite()) {
    throw numeric_error("optimizer_step: non-finite gradient");
  }
  const OptimizerConfig& c = state.config;
  state.step += 1;
  if (c.kind == OptKind::sgd) {
    for (std::size_t li = 0; li < params.layers.size(); ++li) {
      sgd_update(c.learning_rate, c.weight_decay, params.layers[li].weight.data,
                 grads.layers[li].weight.data);
      sgd_update(c.learning_rate, c.weight_decay, params.layers[li].bias,
                 grads.layers[li].bias);
    }
    return;
  }
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    adam_update(c, bc1, bc2, params.layers[li].weight.data,
                grads.layers[li].weight.data,
                state.first_moment.layers[li].weight.data,
                state.second_moment.layers[li].weight.data);
    adam_update(c, bc1, bc2, params.layers[li].bias, grads.layers[li].bias,
                state.first_moment.layers[li].bias,
                state.second_moment.layers[li].bias);
  }
}

}  // namespace hyre::nn
