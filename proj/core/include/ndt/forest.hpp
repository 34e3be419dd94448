#pragma once

#include <span>
#include <vector>

#include "ndt/training.hpp"

namespace ndt {

struct ForestConfig {
  int n_trees = 5;
  OptimizerConfig optimizer;
  /// Worker threads for member training; 1 forces serial execution. Members
  /// are seeded and trained independently either way, so the result is
  /// bit-identical across parallelism levels.
  int parallelism = 1;

  void validate() const;
  /// Member seeds derived from optimizer.seed; pairwise distinct.
  std::vector<std::uint64_t> member_seeds() const;
};

struct ForestModel {
  std::vector<TreeModel> members;
};

struct TrainedForest {
  ForestModel after_search;
  ForestModel after_finetune;
  std::vector<RunReport> reports;
  Losses search_losses;    // of the averaged ensemble
  Losses finetune_losses;
};

/// Run search + finetune independently per member, each with its own derived
/// seed. Execution order (or concurrency) cannot affect the result.
TrainedForest train_forest(const DatasetView& data, const ForestConfig& config,
                           const SearchHooks& hooks = {});

/// Soft voting: the unweighted arithmetic mean of member class distributions.
std::vector<double> forest_predict(const ForestModel& model, std::span<const double> x);

double forest_log_loss(const ForestModel& model, const DatasetView& data,
                       std::span<const std::size_t> rows);
double forest_log_loss(const ForestModel& model, const DatasetView& data, Partition partition);

Losses evaluate(const ForestModel& model, const DatasetView& data);

}  // namespace ndt
