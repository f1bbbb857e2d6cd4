// tensor_nn: matrices, MLP forward/backward, optimizers.

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "hyre/errors.hpp"
#include "hyre/matrix.hpp"
#include "hyre/mlp.hpp"
#include "hyre/optimizer.hpp"
#include "hyre/rng.hpp"

using namespace hyre;
using nn::Activation;
using nn::Matrix;
using nn::MlpParams;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (auto& v : m.data) v = rng.normal(0.0, scale);
  return m;
}

// straight-line reimplementation of the forward map, independent of mlp.cpp
std::vector<double> naive_forward(const MlpParams& params,
                                  std::span<const double> input) {
  std::vector<double> acts(input.begin(), input.end());
  for (const auto& layer : params.layers) {
    std::vector<double> next(layer.fan_out(), 0.0);
    for (std::size_t o = 0; o < layer.fan_out(); ++o) {
      double z = layer.bias[o];
      for (std::size_t i = 0; i < layer.fan_in(); ++i) {
        z += layer.weight.at(o, i) * acts[i];
      }
      switch (layer.act) {
        case Activation::relu: next[o] = z > 0.0 ? z : 0.0; break;
        case Activation::tanh: next[o] = std::tanh(z); break;
        case Activation::identity: next[o] = z; break;
      }
    }
    acts = std::move(next);
  }
  return acts;
}

double scalar_loss(const MlpParams& params, const Matrix& inputs,
                   const Matrix& upstream) {
  // L = sum_ij upstream_ij * forward(inputs)_ij, so dL/dtheta is
  // mlp_backward's output contracted with that upstream
  const Matrix out = nn::mlp_forward(params, inputs);
  double acc = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * upstream.data[i];
  return acc;
}

}  // namespace

TEST_CASE("matrix shape checks and products") {
  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix b(3, 2, {7, 8, 9, 10, 11, 12});
  const Matrix c = nn::matmul(a, b);
  CHECK(c.rows == 2);
  CHECK(c.cols == 2);
  CHECK(c.at(0, 0) == doctest::Approx(58));
  CHECK(c.at(1, 1) == doctest::Approx(154));

  const Matrix bt = nn::transpose(b);
  CHECK(nn::approx_equal(nn::matmul_nt(a, bt), c, 1e-12));
  const Matrix at = nn::transpose(a);
  CHECK(nn::approx_equal(nn::matmul_tn(at, b), c, 1e-12));

  CHECK_THROWS_AS(nn::matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("init_params determinism and parameter counts") {
  const auto a = nn::init_params({1, 1}, Activation::relu, 42);
  const auto b = nn::init_params({1, 1}, Activation::relu, 42);
  CHECK(nn::byte_equal(a, b));
  const auto c = nn::init_params({1, 1}, Activation::relu, 43);
  CHECK_FALSE(nn::byte_equal(a, c));

  const auto zeros = nn::init_params({3, 4, 2}, Activation::relu, 0, nn::InitScheme::zeros);
  for (const auto& layer : zeros.layers) {
    for (double w : layer.weight.data) CHECK(w == 0.0);
    for (double v : layer.bias) CHECK(v == 0.0);
  }

  // 8*50+50 + 50*50+50 + 50*1+1 = 450 + 2550 + 51
  const auto p = nn::init_params({8, 50, 50, 1}, Activation::relu, 7);
  CHECK(p.param_count() == 3051);

  CHECK_THROWS_AS(nn::init_params({5}, Activation::relu, 0), std::invalid_argument);
  CHECK_THROWS_AS(nn::init_params({5, 0, 1}, Activation::relu, 0), std::invalid_argument);
}

TEST_CASE("mlp_forward affine identity and zero cases") {
  MlpParams affine;
  affine.layers.resize(1);
  affine.layers[0].weight = Matrix(2, 3, {1, 2, 3, 4, 5, 6});
  affine.layers[0].bias = {0.5, -0.5};
  affine.layers[0].act = Activation::identity;

  const Matrix x(1, 3, {1.0, 1.0, 1.0});
  const Matrix y = nn::mlp_forward(affine, x);
  CHECK(y.at(0, 0) == doctest::Approx(6.5));
  CHECK(y.at(0, 1) == doctest::Approx(14.5));

  auto zero_net = nn::init_params({3, 4, 2}, Activation::relu, 0, nn::InitScheme::zeros);
  const Matrix z = nn::mlp_forward(zero_net, x);
  for (double v : z.data) CHECK(v == 0.0);

  CHECK_THROWS_AS(nn::mlp_forward(affine, Matrix(1, 2, {1.0, 2.0})),
                  std::invalid_argument);
}

TEST_CASE("mlp_forward matches a straight-line reimplementation") {
  Rng rng(99);
  for (const auto act : {Activation::relu, Activation::tanh}) {
    const auto params = nn::init_params({4, 7, 3}, act, rng.next_u64());
    const Matrix x = random_matrix(5, 4, rng);
    const Matrix y = nn::mlp_forward(params, x);
    for (std::size_t i = 0; i < x.rows; ++i) {
      const auto expect = naive_forward(params, x.row(i));
      for (std::size_t j = 0; j < y.cols; ++j) {
        const double denom = std::max({1.0, std::abs(expect[j]), std::abs(y.at(i, j))});
        CHECK(std::abs(y.at(i, j) - expect[j]) / denom < 1e-12);
      }
    }
  }
}

TEST_CASE("mlp_backward trivia: zero upstream and affine derivative") {
  Rng rng(3);
  const auto params = nn::init_params({3, 5, 2}, Activation::tanh, 11);
  const Matrix x = random_matrix(4, 3, rng);

  const auto zero = nn::mlp_backward(params, x, Matrix(4, 2, 0.0));
  for (const auto& layer : zero.param_grads.layers) {
    for (double g : layer.weight.data) CHECK(g == 0.0);
    for (double g : layer.bias) CHECK(g == 0.0);
  }
  for (double g : zero.input_grads.data) CHECK(g == 0.0);

  MlpParams affine;
  affine.layers.resize(1);
  affine.layers[0].weight = random_matrix(2, 3, rng);
  affine.layers[0].bias = {0.0, 0.0};
  affine.layers[0].act = Activation::identity;
  const Matrix upstream = random_matrix(4, 2, rng);
  const auto back = nn::mlp_backward(affine, x, upstream);
  const Matrix expect_w = nn::matmul_tn(upstream, x);
  CHECK(nn::approx_equal(back.param_grads.layers[0].weight, expect_w, 1e-12));
}

TEST_CASE("gradient check against central finite differences") {
  // 100 random coordinates per architecture, h = 1e-5, 1e-4 relative
  Rng rng(2024);
  for (const auto act : {Activation::relu, Activation::tanh, Activation::identity}) {
    auto params = nn::init_params({3, 8, 2}, act, 555);
    const Matrix x = random_matrix(6, 3, rng);
    const Matrix upstream = random_matrix(6, 2, rng);
    const auto back = nn::mlp_backward(params, x, upstream);

    const std::size_t n_params = params.param_count();
    for (int trial = 0; trial < 100; ++trial) {
      std::size_t flat = rng.uniform_index(n_params);
      // locate (layer, weight-or-bias, offset)
      double* slot = nullptr;
      double analytic = 0.0;
      for (std::size_t li = 0; li < params.layers.size(); ++li) {
        auto& layer = params.layers[li];
        if (flat < layer.weight.data.size()) {
          slot = &layer.weight.data[flat];
          analytic = back.param_grads.layers[li].weight.data[flat];
          break;
        }
        flat -= layer.weight.data.size();
        if (flat < layer.bias.size()) {
          slot = &layer.bias[flat];
          analytic = back.param_grads.layers[li].bias[flat];
          break;
        }
        flat -= layer.bias.size();
      }
      REQUIRE(slot != nullptr);
      const double h = 1e-5;
      const double saved = *slot;
      *slot = saved + h;
      const double up = scalar_loss(params, x, upstream);
      *slot = saved - h;
      const double down = scalar_loss(params, x, upstream);
      *slot = saved;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-6});
      CHECK(std::abs(fd - analytic) / denom < 1e-4);
    }
  }
}

TEST_CASE("input gradients also pass finite differences") {
  Rng rng(77);
  auto params = nn::init_params({3, 6, 2}, Activation::tanh, 8);
  Matrix x = random_matrix(2, 3, rng);
  const Matrix upstream = random_matrix(2, 2, rng);
  const auto back = nn::mlp_backward(params, x, upstream);
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double h = 1e-5;
    const double saved = x.data[i];
    x.data[i] = saved + h;
    const double up = scalar_loss(params, x, upstream);
    x.data[i] = saved - h;
    const double down = scalar_loss(params, x, upstream);
    x.data[i] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(back.input_grads.data[i]), 1e-6});
    CHECK(std::abs(fd - back.input_grads.data[i]) / denom < 1e-4);
  }
}

TEST_CASE("sgd arithmetic and fixed point") {
  MlpParams p;
  p.layers.resize(1);
  p.layers[0].weight = Matrix(1, 1, {1.0});
  p.layers[0].bias = {0.0};
  p.layers[0].act = Activation::identity;

  MlpParams g = p;
  g.layers[0].weight.data[0] = 2.0;
  g.layers[0].bias[0] = 0.0;

  nn::OptimizerConfig oc;
  oc.kind = nn::OptKind::sgd;
  oc.learning_rate = 0.1;
  auto state = nn::OptimizerState::create(oc, p);
  nn::optimizer_step(state, p, g);
  CHECK(p.layers[0].weight.data[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(state.step == 1);

  // zero gradients leave parameters unchanged
  g.fill(0.0);
  const MlpParams before = p;
  nn::optimizer_step(state, p, g);
  CHECK(nn::byte_equal(before, p));
}

TEST_CASE("adam first step matches the bias-corrected formula") {
  MlpParams p;
  p.layers.resize(1);
  p.layers[0].weight = Matrix(1, 2, {0.3, -0.7});
  p.layers[0].bias = {0.1};
  p.layers[0].act = Activation::identity;
  MlpParams g = p;
  g.layers[0].weight.data = {0.5, -2.0};
  g.layers[0].bias = {1.0};

  nn::OptimizerConfig oc;
  oc.kind = nn::OptKind::adam;
  auto state = nn::OptimizerState::create(oc, p);
  const MlpParams before = p;
  nn::optimizer_step(state, p, g);

  // direct evaluation: m_hat = g, v_hat = g^2 at step 1
  auto expected_update = [&](double grad) {
    const double m_hat = grad;
    const double v_hat = grad * grad;
    return oc.learning_rate * m_hat / (std::sqrt(v_hat) + oc.epsilon);
  };
  CHECK(p.layers[0].weight.data[0] ==
        doctest::Approx(before.layers[0].weight.data[0] - expected_update(0.5))
            .epsilon(1e-15));
  CHECK(p.layers[0].weight.data[1] ==
        doctest::Approx(before.layers[0].weight.data[1] - expected_update(-2.0))
            .epsilon(1e-15));
  CHECK(p.layers[0].bias[0] ==
        doctest::Approx(before.layers[0].bias[0] - expected_update(1.0)).epsilon(1e-15));
}

TEST_CASE("optimizer rejects non-finite gradients") {
  auto p = nn::init_params({2, 2}, Activation::identity, 1);
  auto g = p;
  g.layers[0].weight.data[0] = std::numeric_limits<double>::quiet_NaN();
  nn::OptimizerConfig oc;
  auto state = nn::OptimizerState::create(oc, p);
  CHECK_THROWS_AS(nn::optimizer_step(state, p, g), numeric_error);
}

TEST_CASE("training determinism: identical seeds, identical bytes") {
  auto run = [] {
    auto params = nn::init_params({2, 8, 1}, Activation::relu, 5);
    nn::OptimizerConfig oc;
    auto state = nn::OptimizerState::create(oc, params);
    Rng rng(17);
    for (int step = 0; step < 50; ++step) {
      Matrix x = random_matrix(4, 2, rng);
      Matrix y(4, 1);
      for (std::size_t i = 0; i < 4; ++i) y.data[i] = x.at(i, 0) - x.at(i, 1);
      auto trace = nn::mlp_forward_trace(params, x);
      Matrix upstream(4, 1);
      for (std::size_t i = 0; i < 4; ++i) {
        upstream.data[i] = 2.0 * (trace.acts.back().data[i] - y.data[i]) / 4.0;
      }
      auto back = nn::mlp_backward_trace(params, trace, upstream);
      nn::optimizer_step(state, params, back.param_grads);
    }
    return params;
  };
  CHECK(nn::byte_equal(run(), run()));
}
