#include <benchmark/benchmark.h>

#include <vector>

#include "ndt/gating.hpp"
#include "ndt/rng.hpp"
#include "ndt/soft_tree.hpp"
#include "ndt/structure.hpp"
#include "ndt/training.hpp"

namespace {

ndt::DatasetView make_data(std::size_t n, int p, int c, std::uint64_t seed) {
  ndt::Rng rng(seed);
  ndt::DatasetView data;
  data.class_count = c;
  data.features.resize(n * static_cast<std::size_t>(p));
  for (double& v : data.features) v = rng.uniform(-2.0, 2.0);
  data.labels.resize(n);
  for (int& y : data.labels) y = static_cast<int>(rng.below(static_cast<std::size_t>(c)));
  data.split_assignment.assign(n, ndt::Partition::kTrain);
  return data;
}

void BM_Predict(benchmark::State& state) {
  const int depth = static_cast<int>(state.range(0));
  ndt::Rng rng(1);
  ndt::TreeSuperstructure tree(depth, 10, 3, depth, rng);
  ndt::Frontier frontier = ndt::Frontier::full_depth(depth);
  std::vector<double> x(10, 0.3);
  std::vector<double> out(3);
  for (auto _ : state) {
    ndt::predict_into(tree, frontier, x, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Predict)->Arg(3)->Arg(5)->Arg(8);

void BM_Backward(benchmark::State& state) {
  const int depth = static_cast<int>(state.range(0));
  ndt::Rng rng(2);
  ndt::TreeSuperstructure tree(depth, 10, 3, depth, rng);
  ndt::Frontier frontier = ndt::Frontier::full_depth(depth);
  ndt::DatasetView data = make_data(32, 10, 3, 3);
  std::vector<std::size_t> rows = data.partition_indices(ndt::Partition::kTrain);
  for (auto _ : state) {
    ndt::TreeGradients grads = ndt::backward(tree, frontier, data, rows);
    benchmark::DoNotOptimize(grads.split(0).bias);
  }
}
BENCHMARK(BM_Backward)->Arg(3)->Arg(5);

void BM_CombinedEpoch(benchmark::State& state) {
  ndt::DatasetView data = make_data(256, 10, 3, 4);
  ndt::OptimizerConfig config;
  config.start_depth = 5;
  config.depth_cap = 6;
  for (auto _ : state) {
    state.PauseTiming();
    ndt::Rng rng(5);
    ndt::TreeSuperstructure tree(5, 10, 3, 6, rng);
    ndt::Frontier base = ndt::Frontier::full_depth(5);
    ndt::CandidateSet candidates = ndt::sample_candidates(base, tree, rng);
    ndt::SearchState search_state{std::move(tree), base,       std::move(candidates),
                                  ndt::GatingState::uniform(3, 1.0), {1.0, 0.99}, 0,
                                  ndt::Rng(6)};
    state.ResumeTiming();
    ndt::sgd_epoch(search_state, data, config);
    benchmark::DoNotOptimize(search_state.gating.logits.data());
  }
}
BENCHMARK(BM_CombinedEpoch)->Unit(benchmark::kMillisecond);

void BM_GatingWeights(benchmark::State& state) {
  ndt::GatingState gating{{0.4, -0.2, 0.9}, 0.7};
  for (auto _ : state) {
    std::vector<double> pi = ndt::weights(gating);
    benchmark::DoNotOptimize(pi.data());
  }
}
BENCHMARK(BM_GatingWeights);

}  // namespace

BENCHMARK_MAIN();
