#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ndt/dataset.hpp"
#include "ndt/forest.hpp"
#include "ndt/training.hpp"

namespace ndt {

struct BenchmarkDatasetSpec {
  std::string name;  // defaults to the path stem
  std::string path;
  std::string label_column;
  std::string test_path;  // empty: use a random train/test split
  char delimiter = ',';
};

struct BenchmarkSpec {
  std::vector<BenchmarkDatasetSpec> datasets;
  bool run_tree = true;
  bool run_forest = true;
  double train_fraction = 0.7;
  NzvOptions nzv;
  OptimizerConfig optimizer;  // carries the master seed
  int n_trees = 5;
  int parallelism = 1;
  std::string output_dir;

  void validate() const;
};

/// Parse the JSON benchmark description consumed by the CLI.
BenchmarkSpec benchmark_spec_from_json(const std::string& text);

struct ModelScores {
  Losses losses;
  double train_improvement = 0.0;  // percent vs the dataset's baseline
  double test_improvement = 0.0;
};

struct DatasetResult {
  std::string name;
  bool failed = false;
  std::string error;
  Losses baseline;
  ModelScores tree_search, tree_finetune;
  ModelScores forest_search, forest_finetune;
};

struct ImprovementAggregate {
  double avg_train = 0.0, avg_test = 0.0;
  double median_train = 0.0, median_test = 0.0;
};

double median(std::span<const double> values);
ImprovementAggregate aggregate_improvements(std::span<const double> train,
                                            std::span<const double> test);

struct BenchmarkReport {
  std::vector<DatasetResult> results;
  ImprovementAggregate tree_search_agg, tree_finetune_agg;
  ImprovementAggregate forest_search_agg, forest_finetune_agg;
  bool any_failed = false;
};

/// Recompute the four aggregate rows from the per-dataset results (failed
/// rows excluded).
void recompute_aggregates(BenchmarkReport& report);

/// Full protocol per dataset: preprocess, split (or adopt the provided test
/// file), train the fixed-depth baseline, then the requested model kinds;
/// relative improvements are against that dataset's baseline. Per-dataset
/// failures are recorded and excluded from the aggregates.
BenchmarkReport run_benchmark(const BenchmarkSpec& spec, std::ostream* log = nullptr);

/// The two four-column tables (without / with fine-tuning), percentages to
/// three decimals, plus the forest-versus-tree comparison line.
std::string format_improvement_tables(const BenchmarkReport& report, bool run_tree,
                                      bool run_forest);

std::string benchmark_report_to_json(const BenchmarkReport& report);

}  // namespace ndt
