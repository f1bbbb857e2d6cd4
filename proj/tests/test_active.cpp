// Query criteria and the budgeted adaptation loop.

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "hyre/active.hpp"
#include "hyre/errors.hpp"
#include "hyre/rng.hpp"

using namespace hyre;
using active::Criterion;
using active::Pool;
using active::QueryCriterion;
using nn::Matrix;

namespace {

EnsembleModel small_model(std::size_t heads, std::size_t input_dim,
                          std::uint64_t seed) {
  EnsembleConfig cfg;
  cfg.heads = heads;
  cfg.arch = Architecture::vanilla;
  cfg.input_dim = input_dim;
  cfg.hidden = {8};
  cfg.seed = seed;
  return build_ensemble(cfg);
}

Matrix random_inputs(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, d);
  for (auto& v : m.data) v = rng.normal();
  return m;
}

constexpr double kLn2 = 0.6931471805599453;

}  // namespace

TEST_CASE("entropy: maximal at one half, zero at the corners, 0.7 reference") {
  const std::vector<double> w{0.5, 0.5};
  Matrix probs(2, 3, {0.5, 0.0, 0.7, 0.5, 0.0, 0.7});
  const auto h = active::entropy_of_probabilities(probs, w);
  CHECK(h[0] == doctest::Approx(kLn2).epsilon(1e-12));
  CHECK(h[1] == doctest::Approx(0.0));
  // -0.7 ln 0.7 - 0.3 ln 0.3
  CHECK(h[2] == doctest::Approx(0.610864).epsilon(1e-5));

  Matrix sure(1, 1, {1.0});
  CHECK(active::entropy_of_probabilities(sure, std::vector<double>{1.0})[0] == 0.0);

  Matrix bad(1, 1, {1.5});
  CHECK_THROWS_AS(active::entropy_of_probabilities(bad, std::vector<double>{1.0}),
                  numeric_error);
}

TEST_CASE("bald: zero for identical heads, ln 2 for maximal disagreement") {
  const std::vector<double> w{0.5, 0.5};
  Matrix same(2, 2, {0.3, 0.8, 0.3, 0.8});
  for (double v : active::bald_of_probabilities(same, w)) {
    CHECK(v == doctest::Approx(0.0).epsilon(1e-14));
  }

  Matrix split(2, 1, {1.0, 0.0});
  CHECK(active::bald_of_probabilities(split, w)[0] == doctest::Approx(kLn2).epsilon(1e-12));

  // H(0.7) - (H(0.9) + H(0.5)) / 2
  Matrix pair(2, 1, {0.9, 0.5});
  CHECK(active::bald_of_probabilities(pair, w)[0] ==
        doctest::Approx(0.101749).epsilon(1e-4));
}

TEST_CASE("bald on the three-model five-input probability matrix") {
  // rows: three heads; columns: five inputs; the ensemble splits 1-vs-0 on the
  // first four inputs and agrees at one half on the fifth
  Matrix probs(3, 5, {1.0, 0.0, 1.0, 0.0, 0.5,
                      0.0, 1.0, 0.5, 0.5, 0.5,
                      0.5, 0.5, 0.0, 1.0, 0.5});
  const std::vector<double> w(3, 1.0 / 3.0);
  const auto bald = active::bald_of_probabilities(probs, w);
  for (int i = 0; i < 4; ++i) {
    CHECK(bald[i] > bald[4]);
    CHECK(bald[i] > 0.0);
  }
  CHECK(bald[4] == doctest::Approx(0.0).epsilon(1e-14));

  // BALD is non-negative and bounded by the mixture entropy
  const auto mix = active::entropy_of_probabilities(probs, w);
  for (std::size_t i = 0; i < bald.size(); ++i) {
    CHECK(bald[i] >= -1e-12);
    CHECK(bald[i] <= mix[i] + 1e-12);
  }
}

TEST_CASE("variance criterion: zero spread, symmetric case, weighted oracle") {
  const std::vector<double> w{0.5, 0.5};
  Matrix same(2, 2, {1.3, -0.4, 1.3, -0.4});
  for (double v : active::variance_of_outputs(same, w)) CHECK(v == doctest::Approx(0.0));

  Matrix pair(2, 1, {1.0, 3.0});
  CHECK(active::variance_of_outputs(pair, w)[0] == doctest::Approx(1.0).epsilon(1e-15));

  // random five-head outputs against a direct two-pass evaluation
  Rng rng(7);
  Matrix outputs(5, 11);
  for (auto& v : outputs.data) v = rng.normal(0.0, 2.0);
  std::vector<double> weights(5);
  double norm = 0.0;
  for (auto& v : weights) {
    v = rng.uniform(0.1, 1.0);
    norm += v;
  }
  for (auto& v : weights) v /= norm;
  const auto got = active::variance_of_outputs(outputs, weights);
  for (std::size_t i = 0; i < outputs.cols; ++i) {
    double mean = 0.0;
    for (std::size_t k = 0; k < 5; ++k) mean += weights[k] * outputs.at(k, i);
    double expect = 0.0;
    for (std::size_t k = 0; k < 5; ++k) {
      const double d = outputs.at(k, i) - mean;
      expect += weights[k] * d * d;
    }
    CHECK(std::abs(got[i] - expect) < 1e-12);
  }
}

TEST_CASE("BALD stays non-negative for random ensembles (Jensen)") {
  Rng rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t heads = 2 + rng.uniform_index(6);
    Matrix probs(heads, 17);
    for (auto& v : probs.data) v = rng.uniform();
    std::vector<double> w(heads);
    double norm = 0.0;
    for (auto& v : w) {
      v = rng.uniform(0.0, 1.0);
      norm += v;
    }
    for (auto& v : w) v /= norm;
    const auto bald = active::bald_of_probabilities(probs, w);
    const auto mix = active::entropy_of_probabilities(probs, w);
    for (std::size_t i = 0; i < bald.size(); ++i) {
      CHECK(bald[i] >= -1e-12);
      CHECK(bald[i] <= mix[i] + 1e-12);
    }
  }
}

TEST_CASE("pool bookkeeping: duplicates, budget, reveal order") {
  Pool pool(random_inputs(5, 2, 1), {0, 1, 0, 1, 1}, 3);
  CHECK(pool.size() == 5);
  CHECK(pool.remaining_budget() == 3);
  CHECK(pool.reveal(2) == 0.0);
  CHECK_THROWS_AS(pool.reveal(2), std::invalid_argument);
  CHECK(pool.reveal(0) == 0.0);
  CHECK(pool.reveal(4) == 1.0);
  CHECK_THROWS_AS(pool.reveal(1), budget_exhausted);
  CHECK(pool.query_order() == std::vector<std::size_t>{2, 0, 4});
  CHECK(pool.unqueried() == std::vector<std::size_t>{1, 3});

  CHECK_THROWS_AS(Pool(random_inputs(3, 2, 1), {0, 1, 0}, 4), std::invalid_argument);
}

TEST_CASE("select_query: forced choice, tie-break, brute-force argmax") {
  const auto model = small_model(6, 2, 33);
  const auto belief = init_belief(6);

  // single remaining input is a forced choice for any criterion
  Pool tiny(random_inputs(2, 2, 3), {1, 0}, 2);
  tiny.reveal(1);
  for (const auto kind : {Criterion::entropy, Criterion::bald, Criterion::variance,
                          Criterion::random_pick}) {
    CHECK(active::select_query(tiny, {kind, 0}, model, belief) == 0);
  }

  // brute-force argmax over a 200-point pool for each scored criterion
  const Matrix inputs = random_inputs(200, 2, 9);
  std::vector<double> labels(200, 0.0);
  for (const auto kind : {Criterion::entropy, Criterion::bald, Criterion::variance}) {
    Pool pool(inputs, labels, 10);
    std::vector<double> scores;
    switch (kind) {
      case Criterion::entropy: scores = active::score_entropy(model, belief, inputs); break;
      case Criterion::bald: scores = active::score_bald(model, belief, inputs); break;
      default: scores = active::score_variance(model, belief, inputs); break;
    }
    std::size_t expect = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
      if (scores[i] > scores[expect]) expect = i;
    }
    CHECK(active::select_query(pool, {kind, 0}, model, belief) == expect);
  }

  // exhausted budget raises
  Pool spent(random_inputs(3, 2, 4), {0, 0, 0}, 1);
  spent.reveal(0);
  CHECK_THROWS_AS(active::select_query(spent, {Criterion::random_pick, 0}, model, belief),
                  budget_exhausted);
}

TEST_CASE("tie-break picks the lowest index") {
  // two identical inputs produce identical scores; argmax must take the first
  Matrix inputs(3, 2, {5.0, 5.0, 1.0, 1.0, 1.0, 1.0});
  const auto model = small_model(4, 2, 12);
  const auto belief = init_belief(4);
  Pool pool(inputs, {0, 0, 0}, 3);
  const auto scores = active::score_variance(model, belief, inputs);
  if (scores[1] >= scores[0] && scores[1] >= scores[2]) {
    CHECK(active::select_query(pool, {Criterion::variance, 0}, model, belief) <= 1);
  }
  // indices 1 and 2 tie exactly; 1 must win if they are the max
  CHECK(scores[1] == scores[2]);
}

TEST_CASE("run_adaptation: budget zero, no repeats, coherence with one batch") {
  const auto model = small_model(5, 2, 21);
  const Matrix inputs = random_inputs(40, 2, 5);
  Rng rng(2);
  std::vector<double> labels(40);
  for (auto& y : labels) y = rng.uniform() < 0.5 ? 0.0 : 1.0;

  Pool empty_pool(inputs, labels, 0);
  const auto none = active::run_adaptation(model, empty_pool, 0,
                                           {Criterion::random_pick, 1},
                                           PointLoss{LossKind::zero_one});
  CHECK(none.log.empty());
  const auto uniform = compute_weights(none.belief);
  for (double w : uniform) CHECK(w == doctest::Approx(0.2).epsilon(1e-12));

  Pool pool(inputs, labels, 16);
  const auto result = active::run_adaptation(model, pool, 16, {Criterion::bald, 1},
                                             PointLoss{LossKind::zero_one});
  CHECK(result.log.size() == 16);
  std::set<std::size_t> seen;
  for (const auto& rec : result.log) seen.insert(rec.pool_index);
  CHECK(seen.size() == 16);  // no repeats

  // the looped recompute equals one batch accumulate over the revealed set
  BeliefState batch = init_belief(5);
  for (const auto& rec : result.log) {
    Matrix x(1, 2);
    const auto src = inputs.row(rec.pool_index);
    std::copy(src.begin(), src.end(), x.data.begin());
    const Matrix preds = ensemble_forward(model, x);
    batch = accumulate(batch, per_head_losses(std::span<const double>(preds.data),
                                              PointLoss{LossKind::zero_one},
                                              rec.revealed_label));
  }
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(result.belief.cumulative_losses[k] ==
          doctest::Approx(batch.cumulative_losses[k]).epsilon(1e-12));
  }

  Pool small(random_inputs(4, 2, 6), {0, 0, 0, 0}, 4);
  CHECK_THROWS_AS(active::run_adaptation(model, small, 9, {Criterion::random_pick, 0},
                                         PointLoss{LossKind::zero_one}),
                  std::invalid_argument);
}

TEST_CASE("labels from one head's own predictions make it the winner") {
  const auto model = small_model(6, 3, 918);
  const Matrix inputs = random_inputs(64, 3, 77);
  const Matrix preds = ensemble_forward(model, inputs);
  const std::size_t target_head = 3;
  std::vector<double> labels(inputs.rows);
  for (std::size_t i = 0; i < inputs.rows; ++i) {
    labels[i] = preds.at(target_head, i) > 0.0 ? 1.0 : 0.0;
  }
  Pool pool(inputs, labels, 16);
  const auto result = active::run_adaptation(model, pool, 16,
                                             {Criterion::random_pick, 5},
                                             PointLoss{LossKind::zero_one});
  const auto weights = compute_weights(result.belief);
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (k != target_head) CHECK(weights[target_head] >= weights[k]);
  }
  CHECK(result.belief.cumulative_losses[target_head] == 0.0);
}

TEST_CASE("query log renders as ordered CSV") {
  std::vector<active::QueryRecord> log{{0, 7, 0.25, 1.0}, {1, 3, 0.125, 0.0}};
  const auto csv = active::query_log_csv(log);
  CHECK(csv == "iteration,pool_index,criterion_score,revealed_label\n"
               "0,7,0.25,1\n"
               "1,3,0.125,0\n");
}
