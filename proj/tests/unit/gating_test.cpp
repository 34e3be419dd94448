#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "ndt/gating.hpp"
#include "oracles.hpp"

using namespace ndt;

TEST_CASE("weights: rejects empty logits and nonpositive temperatures") {
  CHECK_THROWS_AS(weights(GatingState{{}, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(weights(GatingState{{0.0, 1.0}, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(weights(GatingState{{0.0, 1.0}, -2.0}), std::invalid_argument);
}

TEST_CASE("weights: symmetric logits give the uniform simplex") {
  GatingState state{{0.0, 0.0, 0.0}, 1.0};
  std::vector<double> pi = weights(state);
  for (double v : pi) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("weights: a cold temperature saturates but keeps the argmax") {
  GatingState state{{1.0, 0.0}, 0.01};
  std::vector<double> pi = weights(state);
  // logit gap / tau = 100: the loser holds exp(-100)/(1+exp(-100)).
  const double tail = std::exp(-100.0) / (1.0 + std::exp(-100.0));
  CHECK(pi[1] == doctest::Approx(tail).epsilon(1e-10));
  CHECK(pi[0] == doctest::Approx(1.0 - tail).epsilon(1e-12));

  GatingState warm{{1.0, 0.0}, 1.0};
  std::vector<double> warm_pi = weights(warm);
  CHECK((pi[0] > pi[1]) == (warm_pi[0] > warm_pi[1]));
}

TEST_CASE("weights: argmax matches the logits for random states") {
  Rng rng(19);
  for (int rep = 0; rep < 300; ++rep) {
    GatingState state{oracle::random_input(rng, 4, 10.0), rng.uniform(1e-3, 10.0)};
    std::vector<double> pi = weights(state);
    auto argmax_pi = std::max_element(pi.begin(), pi.end()) - pi.begin();
    auto argmax_y = std::max_element(state.logits.begin(), state.logits.end()) -
                    state.logits.begin();
    CHECK(argmax_pi == argmax_y);
  }
}

TEST_CASE("weights: simplex within 1e-12 across extreme logits and temperatures") {
  Rng rng(29);
  for (int rep = 0; rep < 2000; ++rep) {
    GatingState state{oracle::random_input(rng, 3, 100.0), rng.uniform(1e-3, 10.0)};
    std::vector<double> pi = weights(state);
    double total = 0.0;
    for (double v : pi) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("weights: invariant to shifting every logit by a constant") {
  Rng rng(37);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> y = oracle::random_input(rng, 3, 5.0);
    double tau = rng.uniform(0.05, 5.0);
    double c = rng.uniform(-50.0, 50.0);
    std::vector<double> shifted = y;
    for (double& v : shifted) v += c;
    std::vector<double> a = weights({y, tau});
    std::vector<double> b = weights({shifted, tau});
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(std::abs(a[j] - b[j]) < 1e-12);
  }
}

TEST_CASE("anneal: ten steps of 0.99 land on the closed form") {
  GatingState state{{0.2, -0.1, 0.4}, 1.0};
  AnnealSchedule schedule{1.0, 0.99};
  std::vector<double> before = weights(state);
  for (int t = 0; t < 10; ++t) state = anneal(state, schedule);
  CHECK(state.temperature == doctest::Approx(0.9043820750088044).epsilon(1e-14));
  CHECK(state.logits == std::vector<double>{0.2, -0.1, 0.4});  // logits untouched

  std::vector<double> after = weights(state);
  auto argmax = [](const std::vector<double>& v) {
    return std::max_element(v.begin(), v.end()) - v.begin();
  };
  CHECK(argmax(before) == argmax(after));
}

TEST_CASE("anneal: unit discount keeps the temperature fixed") {
  GatingState state{{1.0, 2.0}, 0.7};
  state = anneal(state, {0.7, 1.0});
  CHECK(state.temperature == 0.7);
}

TEST_CASE("annealing sharpness: max weight is nondecreasing as tau falls") {
  GatingState state{{0.9, 0.3, -0.2}, 1.0};
  AnnealSchedule schedule{1.0, 0.9};
  std::vector<double> initial = weights(state);
  double last_max = *std::max_element(initial.begin(), initial.end());
  for (int t = 0; t < 40; ++t) {
    state = anneal(state, schedule);
    std::vector<double> pi = weights(state);
    double mx = *std::max_element(pi.begin(), pi.end());
    CHECK(mx >= last_max - 1e-15);
    last_max = mx;
  }
  CHECK(last_max > 0.99);
}

TEST_CASE("posterior: cold temperature concentrates mass on one model") {
  GatingState state{{1.0, 0.0, 0.0}, 1e-3};
  std::vector<double> pi = posterior(state);
  CHECK(*std::max_element(pi.begin(), pi.end()) > 1.0 - 1e-9);
}

TEST_CASE("posterior: uniform logits mean maximum uncertainty") {
  GatingState state{{2.0, 2.0, 2.0, 2.0}, 0.5};
  std::vector<double> pi = posterior(state);
  for (double v : pi) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("combined_predict: one-hot gating selects a single variant") {
  Rng rng(71);
  TreeSuperstructure tree = oracle::random_tree(rng, 3, 4, 3, 6);
  Frontier base = Frontier::full_depth(2);
  CandidateSet set = sample_candidates(base, tree, rng);

  GatingState state{{200.0, 0.0, 0.0}, 0.05};  // effectively one-hot on the pruned variant
  std::vector<double> x = oracle::random_input(rng, 4);
  std::vector<double> combined = combined_predict(tree, set, state, x);
  std::vector<double> selected = predict(tree, set.variants[0].frontier, x);
  for (std::size_t c = 0; c < combined.size(); ++c)
    CHECK(std::abs(combined[c] - selected[c]) < 1e-12);
}

TEST_CASE("combined_predict: identical frontiers collapse to one variant") {
  Rng rng(73);
  TreeSuperstructure tree = oracle::random_tree(rng, 2, 3, 3, 4);
  Frontier base = Frontier::full_depth(2);
  CandidateSet set;
  for (int j = 0; j < 3; ++j)
    set.variants.push_back(Variant{j, VariantKind::kBase, std::nullopt, false, base});

  GatingState state{oracle::random_input(rng, 3, 2.0), 0.8};
  std::vector<double> x = oracle::random_input(rng, 3);
  std::vector<double> combined = combined_predict(tree, set, state, x);
  std::vector<double> single = predict(tree, base, x);
  for (std::size_t c = 0; c < combined.size(); ++c)
    CHECK(std::abs(combined[c] - single[c]) < 1e-12);
}

TEST_CASE("combined_predict: matches the scalar mixture oracle") {
  Rng rng(79);
  for (int rep = 0; rep < 50; ++rep) {
    TreeSuperstructure tree = oracle::random_tree(rng, 3, 4, 3, 6);
    Frontier base = Frontier::full_depth(2);
    CandidateSet set = sample_candidates(base, tree, rng);
    GatingState state{oracle::random_input(rng, 3, 3.0), rng.uniform(0.1, 2.0)};

    std::vector<double> x = oracle::random_input(rng, 4);
    std::vector<double> pi = weights(state);
    std::vector<double> expected = oracle::combined_predict(tree, set, pi, x);
    std::vector<double> got = combined_predict(tree, set, state, x);
    for (std::size_t c = 0; c < got.size(); ++c) CHECK(std::abs(got[c] - expected[c]) < 1e-12);
  }
}
