#include "hyre/mlp.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "hyre/rng.hpp"

namespace hyre::nn {

Activation parse_activation(const std::string& tag) {
  if (tag == "relu") return Activation::relu;
  if (tag == "tanh") return Activation::tanh;
  if (tag == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation: " + tag);
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

InitScheme parse_init_scheme(const std::string& tag) {
  if (tag == "kaiming_uniform") return InitScheme::kaiming_uniform;
  if (tag == "zeros") return InitScheme::zeros;
  throw std::invalid_argument("unknown init scheme: " + tag);
}

std::size_t MlpParams::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void MlpParams::fill(double value) {
  for (auto& l : layers) {
    for (auto& w : l.weight.data) w = value;
    for (auto& b : l.bias) b = value;
  }
}

void MlpParams::add_scaled(const MlpParams& other, double scale) {
  if (!same_shape(other)) {
    throw std::invalid_argument("add_scaled: shape mismatch");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const auto& o = other.layers[i];
    for (std::size_t j = 0; j < l.weight.data.size(); ++j) {
      l.weight.data[j] += scale * o.weight.data[j];
    }
    for (std::size_t j = 0; j < l.bias.size(); ++j) {
      l.bias[j] += scale * o.bias[j];
    }
  }
}

bool MlpParams::same_shape(const MlpParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows != other.layers[i].weight.rows ||
        layers[i].weight.cols != other.layers[i].weight.cols ||
        layers[i].bias.size() != other.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

bool MlpParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.all_finite()) return false;
    for (double b : l.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

bool byte_equal(const MlpParams& a, const MlpParams& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& la = a.layers[i];
    const auto& lb = b.layers[i];
    if (la.act != lb.act) return false;
    if (std::memcmp(la.weight.data.data(), lb.weight.data.data(),
                    la.weight.data.size() * sizeof(double)) != 0) {
      return false;
    }
    if (std::memcmp(la.bias.data(), lb.bias.data(),
                    la.bias.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

MlpParams init_params(const std::vector<std::size_t>& layer_sizes,
                      Activation hidden_act, std::uint64_t seed,
                      InitScheme scheme, Activation final_act) {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("init_params: need at least 2 layer sizes");
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw std::invalid_argument("init_params: layer size 0");
  }
  Rng rng(seed);
  MlpParams params;
  params.layers.reserve(layer_sizes.size() - 1);
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    Layer layer;
    const std::size_t fan_in = layer_sizes[i];
    const std::size_t fan_out = layer_sizes[i + 1];
    layer.weight = Matrix(fan_out, fan_in);
    layer.bias.assign(fan_out, 0.0);
    layer.act = (i + 2 == layer_sizes.size()) ? final_act : hidden_act;
    if (scheme == InitScheme::kaiming_uniform) {
      const double gain = layer.act == Activation::relu ? std::sqrt(2.0) : 1.0;
      const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
      for (auto& w : layer.weight.data) w = rng.uniform(-bound, bound);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

namespace {

void apply_activation(Matrix& m, Activation act) {
  switch (act) {
    case Activation::relu:
      for (auto& v : m.data) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::tanh:
      for (auto& v : m.data) v = std::tanh(v);
      break;
    case Activation::identity:
      break;
  }
}

// dL/dz from dL/da given a = act(z); tanh and relu derivatives are
// reconstructed from the post-activation value
void activation_backward(const Matrix& post, Matrix& grad, Activation act) {
  switch (act) {
    case Activation::relu:
      for (std::size_t i = 0; i < grad.data.size(); ++i) {
        if (post.data[i] <= 0.0) grad.data[i] = 0.0;
      }
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < grad.data.size(); ++i) {
        grad.data[i] *= 1.0 - post.data[i] * post.data[i];
      }
      break;
    case Activation::identity:
      break;
  }
}

}  // namespace

ForwardTrace mlp_forward_trace(const MlpParams& params, const Matrix& inputs) {
  if (inputs.cols != params.input_dim()) {
    throw std::invalid_argument("mlp_forward: input dim " +
                                std::to_string(inputs.cols) + " != " +
                                std::to_string(params.input_dim()));
  }
  ForwardTrace trace;
  trace.acts.reserve(params.layers.size() + 1);
  trace.acts.push_back(inputs);
  for (const auto& layer : params.layers) {
    Matrix z = matmul_nt(trace.acts.back(), layer.weight);
    for (std::size_t i = 0; i < z.rows; ++i) {
      double* row = z.data.data() + i * z.cols;
      for (std::size_t j = 0; j < z.cols; ++j) row[j] += layer.bias[j];
    }
    apply_activation(z, layer.act);
    trace.acts.push_back(std::move(z));
  }
  return trace;
}

Matrix mlp_forward(const MlpParams& params, const Matrix& inputs) {
  return mlp_forward_trace(params, inputs).acts.back();
}

BackwardResult mlp_backward_trace(const MlpParams& params,
                                  const ForwardTrace& trace,
                                  const Matrix& upstream_grads) {
  const std::size_t n_layers = params.layers.size();
  if (trace.acts.size() != n_layers + 1) {
    throw std::invalid_argument("mlp_backward: trace/param layer mismatch");
  }
  require_shape(upstream_grads, trace.acts.back().rows, params.output_dim(),
                "mlp_backward: upstream_grads");

  BackwardResult result;
  result.param_grads.layers.resize(n_layers);

  Matrix grad = upstream_grads;
  for (std::size_t li = n_layers; li-- > 0;) {
    const Layer& layer = params.layers[li];
    activation_backward(trace.acts[li + 1], grad, layer.act);

    Layer& g = result.param_grads.layers[li];
    g.act = layer.act;
    // dW = grad^T * input_acts, db = column sums of grad
    g.weight = matmul_tn(grad, trace.acts[li]);
    g.bias.assign(layer.fan_out(), 0.0);
    for (std::size_t i = 0; i < grad.rows; ++i) {
      const double* row = grad.data.data() + i * grad.cols;
      for (std::size_t j = 0; j < grad.cols; ++j) g.bias[j] += row[j];
    }
    grad = matmul(grad, layer.weight);  // dL/d(input of this layer)
  }
  result.input_grads = std::move(grad);
  return result;
}

BackwardResult mlp_backward(const MlpParams& params, const Matrix& inputs,
                            const Matrix& upstream_grads) {
  return mlp_backward_trace(params, mlp_forward_trace(params, inputs),
                            upstream_grads);
}

}  // namespace hyre::nn
