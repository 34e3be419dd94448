#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "ndt/dataset.hpp"
#include "ndt/gating.hpp"
#include "ndt/rng.hpp"
#include "ndt/soft_tree.hpp"
#include "ndt/structure.hpp"

namespace ndt {

struct OptimizerConfig {
  double step_size = 0.05;
  int batch_size = 32;
  int epochs_per_iteration = 20;
  int iterations = 10;
  int baseline_epochs = 200;
  int finetune_epochs = 200;
  int start_depth = 5;
  int depth_cap = 10;
  double tau0 = 1.0;
  double discount = 0.99;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
  AnnealSchedule schedule() const { return {tau0, discount}; }
};

struct IterationRecord {
  int iteration = 0;        // 1-based
  double tau_start = 0.0;   // temperature in effect while training this round
  double tau_end = 0.0;     // after the anneal step: tau0 * discount^iteration
  std::vector<double> posterior;
  VariantKind chosen_kind = VariantKind::kBase;
  std::optional<NodeId> chosen_target;
  bool chosen_degenerate = false;
  double chosen_probability = 0.0;
  double train_loss = 0.0;
  double test_loss = 0.0;  // NaN when the view has no test rows
};

struct RunReport {
  std::vector<IterationRecord> iterations;
  std::vector<NodeId> final_frontier;
  double search_train_loss = 0.0;
  double search_test_loss = 0.0;
  double finetune_train_loss = 0.0;  // NaN until finetune runs
  double finetune_test_loss = 0.0;
  // Work counters; deterministic, unlike wall-clock time, so reports from
  // identical runs stay byte-identical.
  std::uint64_t total_epochs = 0;
  std::uint64_t total_batches = 0;
};

struct SearchState {
  TreeSuperstructure super;
  Frontier base;
  CandidateSet candidates;
  GatingState gating;
  AnnealSchedule schedule;
  int iteration = 0;
  Rng rng;
};

struct SearchHooks {
  /// When set, overrides the weighted draw of the variant to commit.
  std::function<std::size_t(int iteration, const CandidateSet&, std::span<const double> posterior)>
      pick_override;
  std::ostream* log = nullptr;
};

/// A finalized tree: routing frontier plus the shared parameters.
struct TreeModel {
  TreeSuperstructure super;
  Frontier frontier;
};

struct Losses {
  double train = 0.0;
  double test = 0.0;
};

/// Mean -log of the gated mixture's probability for the true class.
double combined_loss(const TreeSuperstructure& tree, const CandidateSet& candidates,
                     const GatingState& gating, const DatasetView& data,
                     std::span<const std::size_t> rows);
double combined_loss(const SearchState& state, const DatasetView& data,
                     std::span<const std::size_t> rows);

struct CombinedGradients {
  TreeGradients tree;
  std::vector<double> gating;
};

/// Batch-mean analytic gradient of combined_loss with respect to every tree
/// parameter and every gating logit.
CombinedGradients combined_backward(const TreeSuperstructure& tree, const CandidateSet& candidates,
                                    const GatingState& gating, const DatasetView& data,
                                    std::span<const std::size_t> rows);

/// One shuffled pass of mini-batch gradient descent on the combined loss.
/// Updates all routed split parameters, leaf logits and the gating logits;
/// the shuffle and therefore the whole epoch is a pure function of state.rng.
void sgd_epoch(SearchState& state, const DatasetView& data, const OptimizerConfig& config);

/// The architecture search loop. Per round: sample prune/base/graft
/// candidates, reset the gating, train the stacked loss for
/// epochs_per_iteration epochs, read the gating posterior, sample one variant
/// from it, commit its frontier, and lower the temperature. Everything is a
/// pure function of (data, config.seed).
std::pair<SearchState, RunReport> search(const DatasetView& data, const OptimizerConfig& config,
                                         const SearchHooks& hooks = {});

/// Post-search training of the committed frontier alone (no gating, single
/// variant) for finetune_epochs. Returns final train/test log-loss.
Losses finetune(SearchState& state, const DatasetView& data, const OptimizerConfig& config,
                const SearchHooks& hooks = {});

/// Fixed full-depth frontier trained for baseline_epochs with the same
/// initialization scheme and seed handling as search.
std::pair<TreeModel, Losses> train_baseline(const DatasetView& data,
                                            const OptimizerConfig& config);

/// 100 * (baseline - model) / baseline. Throws NonpositiveBaselineError.
double relative_improvement(double baseline_loss, double model_loss);

/// search + finetune bundled; keeps snapshots from both stages so callers can
/// report with- and without-finetune numbers from one run.
struct TrainedTree {
  TreeModel after_search;
  TreeModel after_finetune;
  Losses search_losses;
  Losses finetune_losses;
  RunReport report;
};

TrainedTree train_tree(const DatasetView& data, const OptimizerConfig& config,
                       const SearchHooks& hooks = {});

Losses evaluate(const TreeModel& model, const DatasetView& data);

}  // namespace ndt
