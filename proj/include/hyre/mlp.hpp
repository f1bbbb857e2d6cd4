#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyre/matrix.hpp"

namespace hyre::nn {

enum class Activation { relu, tanh, identity };

Activation parse_activation(const std::string& tag);
const char* activation_name(Activation a);

enum class InitScheme { kaiming_uniform, zeros };

InitScheme parse_init_scheme(const std::string& tag);

// One affine layer: y = x W^T + b, then the layer's activation.
struct Layer {
  Matrix weight;               // out x in
  std::vector<double> bias;    // out
  Activation act = Activation::identity;

  std::size_t fan_in() const { return weight.cols; }
  std::size_t fan_out() const { return weight.rows; }
};

// Fixed-topology multi-layer perceptron parameters. Gradients reuse the same
// shape, so MlpParams doubles as the gradient container.
struct MlpParams {
  std::vector<Layer> layers;

  std::size_t input_dim() const { return layers.front().fan_in(); }
  std::size_t output_dim() const { return layers.back().fan_out(); }
  std::size_t param_count() const;

  void fill(double value);
  void add_scaled(const MlpParams& other, double scale);  // this += scale*other
  bool same_shape(const MlpParams& other) const;
  bool all_finite() const;
};

bool byte_equal(const MlpParams& a, const MlpParams& b);

// Hidden layers get `hidden_act`; the final layer is identity unless
// `final_act` overrides it.
MlpParams init_params(const std::vector<std::size_t>& layer_sizes,
                      Activation hidden_act, std::uint64_t seed,
                      InitScheme scheme = InitScheme::kaiming_uniform,
                      Activation final_act = Activation::identity);

Matrix mlp_forward(const MlpParams& params, const Matrix& inputs);

// Per-layer post-activation values; acts[0] is the input, acts[i] the output
// of layer i-1. Kept so backward passes and feature taps share one forward.
struct ForwardTrace {
  std::vector<Matrix> acts;
};

ForwardTrace mlp_forward_trace(const MlpParams& params, const Matrix& inputs);

struct BackwardResult {
  MlpParams param_grads;
  Matrix input_grads;
};

// Reverse-mode gradients of the forward map contracted with upstream_grads
// (shape N x output_dim).
BackwardResult mlp_backward(const MlpParams& params, const Matrix& inputs,
                            const Matrix& upstream_grads);

// Same, but reusing a trace from mlp_forward_trace on the same inputs.
BackwardResult mlp_backward_trace(const MlpParams& params,
                                  const ForwardTrace& trace,
                                  const Matrix& upstream_grads);

}  // namespace hyre::nn
