#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ndt/errors.hpp"
#include "ndt/model_io.hpp"
#include "ndt/training.hpp"
#include "oracles.hpp"

using namespace ndt;

namespace {

OptimizerConfig tiny_config(std::uint64_t seed) {
  OptimizerConfig config;
  config.iterations = 3;
  config.epochs_per_iteration = 4;
  config.baseline_epochs = 20;
  config.finetune_epochs = 10;
  config.start_depth = 2;
  config.depth_cap = 4;
  config.seed = seed;
  return config;
}

SearchState make_state(Rng& rng, const DatasetView& data, int depth, int cap) {
  TreeSuperstructure tree = oracle::random_tree(rng, depth, static_cast<int>(data.feature_dim()),
                                                data.class_count, cap);
  Frontier base = Frontier::full_depth(depth);
  CandidateSet candidates = sample_candidates(base, tree, rng);
  GatingState gating{oracle::random_input(rng, 3, 1.0), rng.uniform(0.3, 2.0)};
  return SearchState{std::move(tree), base, std::move(candidates), std::move(gating),
                     {1.0, 0.99},   0,    Rng(rng.next_u64())};
}

}  // namespace

TEST_CASE("optimizer config validation catches bad values") {
  OptimizerConfig config;
  CHECK_NOTHROW(config.validate());
  config.iterations = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = {};
  config.step_size = 0.0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = {};
  config.start_depth = 11;  // above the default cap of 10
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = {};
  config.discount = 1.5;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = {};
  config.finetune_epochs = 0;  // explicitly allowed: disables fine-tuning
  CHECK_NOTHROW(config.validate());
}

TEST_CASE("combined_loss: one-hot gating equals the single-frontier log loss") {
  Rng rng(101);
  DatasetView data = oracle::blob_view(rng, 40, 4, 3, 0.6);
  SearchState state = make_state(rng, data, 2, 4);
  state.gating.logits = {0.0, 500.0, 0.0};
  state.gating.temperature = 0.1;
  auto rows = data.partition_indices(Partition::kTrain);

  double combined = combined_loss(state, data, rows);
  double single = log_loss(state.super, state.candidates.variants[1].frontier, data, rows);
  CHECK(std::abs(combined - single) < 1e-12);
}

TEST_CASE("combined_loss: identical variants match the single-variant loss") {
  Rng rng(103);
  DatasetView data = oracle::blob_view(rng, 30, 3, 2, 0.6);
  TreeSuperstructure tree = oracle::random_tree(rng, 2, 3, 2, 4);
  Frontier base = Frontier::full_depth(2);
  CandidateSet set;
  for (int j = 0; j < 3; ++j)
    set.variants.push_back(Variant{j, VariantKind::kBase, std::nullopt, false, base});
  GatingState gating{{0.3, -0.2, 0.8}, 0.7};
  auto rows = data.partition_indices(Partition::kTrain);

  double combined = combined_loss(tree, set, gating, data, rows);
  double single = log_loss(tree, base, data, rows);
  CHECK(std::abs(combined - single) < 1e-12);
}

TEST_CASE("combined_loss: matches a scalar mixture-then-NLL oracle") {
  Rng rng(107);
  DatasetView data = oracle::blob_view(rng, 25, 4, 3, 0.6);
  auto rows = data.partition_indices(Partition::kTrain);
  for (int rep = 0; rep < 20; ++rep) {
    SearchState state = make_state(rng, data, 2, 4);
    std::vector<double> pi = weights(state.gating);
    double expected = 0.0;
    for (auto i : rows) {
      std::vector<double> mix =
          oracle::combined_predict(state.super, state.candidates, pi, data.row(i));
      expected += -std::log(std::max(mix[static_cast<std::size_t>(data.labels[i])], 1e-12));
    }
    expected /= static_cast<double>(rows.size());
    CHECK(std::abs(combined_loss(state, data, rows) - expected) < 1e-10);
  }
}

TEST_CASE("combined_backward: gradients match finite differences (tree + gating)") {
  Rng rng(109);
  DatasetView data = oracle::blob_view(rng, 10, 3, 3, 0.5);
  auto rows = data.partition_indices(Partition::kTrain);
  for (int rep = 0; rep < 5; ++rep) {
    SearchState state = make_state(rng, data, 2, 4);
    CombinedGradients grads =
        combined_backward(state.super, state.candidates, state.gating, data, rows);

    auto loss = [&] { return combined_loss(state, data, rows); };
    for (NodeId n = 0; n < static_cast<NodeId>(state.super.node_count()); ++n) {
      for (std::size_t j = 0; j < state.super.split(n).weights.size(); ++j) {
        double fd = oracle::finite_difference(&state.super.split(n).weights[j], 1e-5, loss);
        CHECK(oracle::relative_error(grads.tree.split(n).weights[j], fd) < 1e-4);
      }
      double fd_b = oracle::finite_difference(&state.super.split(n).bias, 1e-5, loss);
      CHECK(oracle::relative_error(grads.tree.split(n).bias, fd_b) < 1e-4);
      for (std::size_t c = 0; c < state.super.leaf(n).logits.size(); ++c) {
        double fd_l = oracle::finite_difference(&state.super.leaf(n).logits[c], 1e-5, loss);
        CHECK(oracle::relative_error(grads.tree.leaf(n).logits[c], fd_l) < 1e-4);
      }
    }
    for (std::size_t k = 0; k < state.gating.logits.size(); ++k) {
      double fd = oracle::finite_difference(&state.gating.logits[k], 1e-5, loss);
      CHECK(oracle::relative_error(grads.gating[k], fd) < 1e-4);
    }
  }
}

TEST_CASE("sgd_epoch: zero step size leaves every parameter bit-identical") {
  Rng rng(113);
  DatasetView data = oracle::blob_view(rng, 30, 3, 2, 0.6);
  SearchState state = make_state(rng, data, 2, 4);
  TreeSuperstructure before = state.super;
  std::vector<double> gating_before = state.gating.logits;

  OptimizerConfig config = tiny_config(1);
  config.step_size = 0.0;  // bypasses validate() on purpose
  sgd_epoch(state, data, config);
  CHECK(state.super == before);
  CHECK(state.gating.logits == gating_before);
}

TEST_CASE("sgd_epoch: a single full-batch step reduces the batch loss") {
  Rng rng(127);
  DatasetView data = oracle::blob_view(rng, 40, 3, 2, 0.8);
  SearchState state = make_state(rng, data, 2, 4);
  auto rows = data.partition_indices(Partition::kTrain);

  OptimizerConfig config = tiny_config(1);
  config.batch_size = static_cast<int>(rows.size());
  config.step_size = 0.05;
  double before = combined_loss(state, data, rows);
  sgd_epoch(state, data, config);
  double after = combined_loss(state, data, rows);
  CHECK(after < before);
}

TEST_CASE("sgd_epoch: same seed, same data, identical parameters") {
  Rng seed_rng(131);
  DatasetView data = oracle::blob_view(seed_rng, 30, 3, 2, 0.6);
  auto run = [&] {
    Rng rng(555);
    SearchState state = make_state(rng, data, 2, 4);
    OptimizerConfig config = tiny_config(1);
    sgd_epoch(state, data, config);
    return state;
  };
  SearchState a = run();
  SearchState b = run();
  CHECK(a.super == b.super);
  CHECK(a.gating.logits == b.gating.logits);
}

TEST_CASE("search: one iteration anneals tau to 0.99") {
  Rng rng(137);
  DatasetView data = oracle::blob_view(rng, 40, 3, 2, 0.8);
  OptimizerConfig config = tiny_config(7);
  config.iterations = 1;
  auto [state, report] = search(data, config);
  REQUIRE(report.iterations.size() == 1);
  CHECK(report.iterations[0].tau_start == 1.0);
  CHECK(report.iterations[0].tau_end == doctest::Approx(0.99).epsilon(1e-15));
}

TEST_CASE("search: tau sequence equals the folded schedule exactly") {
  Rng rng(139);
  DatasetView data = oracle::blob_view(rng, 40, 3, 2, 0.8);
  OptimizerConfig config = tiny_config(11);
  config.iterations = 10;
  auto [state, report] = search(data, config);
  REQUIRE(report.iterations.size() == 10);
  double tau = 1.0;
  for (const auto& rec : report.iterations) {
    CHECK(rec.tau_start == tau);
    tau *= 0.99;
    CHECK(rec.tau_end == tau);  // exact: the loop performs the same fold
  }
  CHECK(std::abs(report.iterations.back().tau_end - 0.9043820750088044) < 1e-12);
}

TEST_CASE("search: forced base commits keep the starting architecture") {
  Rng rng(149);
  DatasetView data = oracle::blob_view(rng, 40, 3, 2, 0.8);
  OptimizerConfig config = tiny_config(13);
  SearchHooks hooks;
  hooks.pick_override = [](int, const CandidateSet& set, std::span<const double>) {
    for (std::size_t j = 0; j < set.size(); ++j)
      if (set.variants[j].kind == VariantKind::kBase) return j;
    return std::size_t{0};
  };
  auto [state, report] = search(data, config, hooks);
  CHECK(state.base == Frontier::full_depth(config.start_depth));
  for (const auto& rec : report.iterations) CHECK(rec.chosen_kind == VariantKind::kBase);
}

TEST_CASE("search: identical seeds produce identical reports and models") {
  Rng rng(151);
  DatasetView data = oracle::blob_view(rng, 50, 4, 3, 0.8);
  OptimizerConfig config = tiny_config(4242);
  auto [state_a, report_a] = search(data, config);
  auto [state_b, report_b] = search(data, config);
  CHECK(state_a.super == state_b.super);
  CHECK(state_a.base == state_b.base);
  CHECK(run_report_to_json(report_a) == run_report_to_json(report_b));
}

TEST_CASE("search: every record carries a simplex posterior") {
  Rng rng(157);
  DatasetView data = oracle::blob_view(rng, 40, 3, 3, 0.6);
  OptimizerConfig config = tiny_config(3);
  config.iterations = 6;
  auto [state, report] = search(data, config);
  REQUIRE(report.iterations.size() == 6);
  for (const auto& rec : report.iterations) {
    double total = 0.0;
    for (double v : rec.posterior) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("search: commits transfer weights bit-identically") {
  Rng rng(163);
  DatasetView data = oracle::blob_view(rng, 30, 3, 2, 0.6);
  TreeSuperstructure tree = oracle::random_tree(rng, 2, 3, 2, 4);
  Frontier base = Frontier::full_depth(2);
  CandidateSet set = sample_candidates(base, tree, rng);
  TreeSuperstructure snapshot = tree;
  for (const Variant& v : set.variants) (void)commit(v);
  CHECK(tree == snapshot);  // commit never touches parameters
}

TEST_CASE("finetune: zero epochs reproduce the post-search losses") {
  Rng rng(167);
  DatasetView data = oracle::blob_view(rng, 40, 3, 2, 0.8);
  OptimizerConfig config = tiny_config(17);
  config.finetune_epochs = 0;
  auto [state, report] = search(data, config);
  Losses losses = finetune(state, data, config);
  CHECK(losses.train == doctest::Approx(report.search_train_loss).epsilon(1e-12));
  CHECK(losses.test == doctest::Approx(report.search_test_loss).epsilon(1e-12));
}

TEST_CASE("finetune: improves train loss on a separable toy and spares gating") {
  Rng rng(173);
  DatasetView data = oracle::blob_view(rng, 60, 2, 2, 2.5);
  OptimizerConfig config = tiny_config(19);
  config.start_depth = 1;
  config.finetune_epochs = 80;
  auto [state, report] = search(data, config);
  std::vector<double> gating_before = state.gating.logits;
  double before = report.search_train_loss;
  Losses after = finetune(state, data, config);
  CHECK(after.train <= before + 1e-9);
  CHECK(state.gating.logits == gating_before);
}

TEST_CASE("baseline: depth-5 frontier has 32 leaves and is seed-stable") {
  Rng rng(179);
  DatasetView data = oracle::blob_view(rng, 60, 3, 2, 0.8);
  OptimizerConfig config = tiny_config(23);
  config.start_depth = 5;
  config.depth_cap = 6;
  config.baseline_epochs = 5;
  auto [model_a, losses_a] = train_baseline(data, config);
  auto [model_b, losses_b] = train_baseline(data, config);
  CHECK(model_a.frontier.size() == 32);
  CHECK(losses_a.train == losses_b.train);
  CHECK(losses_a.test == losses_b.test);
  CHECK(model_a.super == model_b.super);
}

TEST_CASE("baseline: chance-level loss on label-shuffled data") {
  Rng rng(181);
  DatasetView data = oracle::blob_view(rng, 600, 4, 2, 1.5);
  // Shuffle labels to destroy any signal.
  std::vector<int> labels = data.labels;
  rng.shuffle(labels);
  data.labels = labels;

  OptimizerConfig config;
  config.start_depth = 5;
  config.depth_cap = 5;
  config.baseline_epochs = 60;
  config.seed = 29;
  auto [model, losses] = train_baseline(data, config);
  CHECK(std::abs(losses.test - std::log(2.0)) < 0.05);
}

TEST_CASE("relative_improvement: closed forms and the sign convention") {
  CHECK(relative_improvement(0.693, 0.600) == doctest::Approx(13.42).epsilon(1e-3));
  CHECK(relative_improvement(0.5, 0.5) == 0.0);
  CHECK(relative_improvement(0.5, 0.6) < 0.0);
  CHECK_THROWS_AS(relative_improvement(0.0, 0.1), NonpositiveBaselineError);
  CHECK_THROWS_AS(relative_improvement(-1.0, 0.1), NonpositiveBaselineError);
}

TEST_CASE("search requires a split with a nonempty train partition") {
  Rng rng(191);
  DatasetView data = oracle::blob_view(rng, 20, 3, 2, 0.5);
  data.split_assignment.clear();
  OptimizerConfig config = tiny_config(1);
  CHECK_THROWS_AS(search(data, config), EmptyPartitionError);
}

TEST_CASE("search: survives pinned caps that force degenerate slots") {
  Rng rng(197);
  DatasetView data = oracle::blob_view(rng, 30, 3, 2, 0.8);

  // Depth 1 with cap 1: grafting is only ever legal again from {root}.
  OptimizerConfig config = tiny_config(37);
  config.start_depth = 1;
  config.depth_cap = 1;
  config.iterations = 8;
  config.epochs_per_iteration = 1;
  auto [state, report] = search(data, config);
  CHECK(report.iterations.size() == 8);
  for (const auto& rec : report.iterations) {
    if (rec.chosen_target) CHECK(node_depth(*rec.chosen_target) < 1);
  }
  CHECK(state.base.max_depth() <= 1);

  // Cap 2 from depth 1: the frontier can wander between {root} and full
  // depth 2, hitting both degenerate edges along the way.
  config.depth_cap = 2;
  config.iterations = 30;
  auto [state2, report2] = search(data, config);
  CHECK(report2.iterations.size() == 30);
  CHECK(state2.base.max_depth() <= 2);
}

TEST_CASE("train_tree: report carries both search and finetune losses") {
  Rng rng(193);
  DatasetView data = oracle::blob_view(rng, 50, 3, 2, 1.0);
  OptimizerConfig config = tiny_config(31);
  TrainedTree tree = train_tree(data, config);
  CHECK(tree.report.iterations.size() == static_cast<std::size_t>(config.iterations));
  CHECK(tree.report.finetune_train_loss == tree.finetune_losses.train);
  Losses eval_search = evaluate(tree.after_search, data);
  CHECK(eval_search.train == doctest::Approx(tree.search_losses.train).epsilon(1e-12));
  Losses eval_ft = evaluate(tree.after_finetune, data);
  CHECK(eval_ft.train == doctest::Approx(tree.finetune_losses.train).epsilon(1e-12));
}
