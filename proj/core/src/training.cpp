#include "ndt/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <stdexcept>
#include <string>

#include "ndt/errors.hpp"

namespace ndt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> require_train_rows(const DatasetView& data) {
  if (!data.has_split()) throw EmptyPartitionError("dataset has no train/test split");
  std::vector<std::size_t> rows = data.partition_indices(Partition::kTrain);
  if (rows.empty()) throw EmptyPartitionError("train partition is empty");
  return rows;
}

void apply_update(TreeSuperstructure& tree, const TreeGradients& grads, double step) {
  for (NodeId n = 0; n < static_cast<NodeId>(tree.node_count()); ++n) {
    SplitParams& s = tree.split(n);
    const SplitParams& gs = grads.split(n);
    for (std::size_t j = 0; j < s.weights.size(); ++j) s.weights[j] -= step * gs.weights[j];
    s.bias -= step * gs.bias;
    LeafLogits& l = tree.leaf(n);
    const LeafLogits& gl = grads.leaf(n);
    for (std::size_t c = 0; c < l.logits.size(); ++c) l.logits[c] -= step * gl.logits[c];
  }
}

// Gradient of the batch-mean combined loss over `rows`, accumulated into
// grads/gating_grad (both already sized and zeroed). With mixture
// m = sum_j g_j p_j and loss -log m:
//   dL/d(tree params through variant j) uses coeff_j = -g_j / m
//   dL/d(gating logit k) = (g_k / tau) * (1 - p_k / m)
void accumulate_combined(const TreeSuperstructure& tree, const CandidateSet& candidates,
                         const GatingState& gating, const DatasetView& data,
                         std::span<const std::size_t> rows, TreeGradients& grads,
                         std::vector<double>& gating_grad) {
  const std::vector<double> g = weights(gating);
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  std::vector<double> p(candidates.size());
  for (std::size_t i : rows) {
    std::span<const double> x = data.row(i);
    const int y = data.labels[i];
    double m = 0.0;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      p[j] = true_class_probability(tree, candidates.variants[j].frontier, x, y);
      m += g[j] * p[j];
    }
    if (m <= kProbabilityClamp) continue;  // clamped: flat loss, zero gradient
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      const double coeff = -inv_n * g[j] / m;
      accumulate_prediction_gradient(tree, candidates.variants[j].frontier, x, y, coeff, grads);
    }
    for (std::size_t k = 0; k < candidates.size(); ++k)
      gating_grad[k] += inv_n * (g[k] / gating.temperature) * (1.0 - p[k] / m);
  }
}

// One shuffled single-frontier epoch (used by finetune and the baseline).
void single_frontier_epoch(TreeSuperstructure& tree, const Frontier& frontier,
                           const DatasetView& data, std::span<const std::size_t> rows,
                           const OptimizerConfig& config, Rng& rng, TreeGradients& grads,
                           std::uint64_t* batch_counter) {
  std::vector<std::size_t> order(rows.begin(), rows.end());
  rng.shuffle(order);
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t len = std::min(bs, order.size() - start);
    std::span<const std::size_t> batch(order.data() + start, len);
    grads.clear();
    const double inv_n = 1.0 / static_cast<double>(len);
    for (std::size_t i : batch) {
      std::span<const double> x = data.row(i);
      const int y = data.labels[i];
      const double p = true_class_probability(tree, frontier, x, y);
      const double coeff = p > kProbabilityClamp ? -inv_n / p : 0.0;
      accumulate_prediction_gradient(tree, frontier, x, y, coeff, grads);
    }
    apply_update(tree, grads, config.step_size);
    if (batch_counter) ++*batch_counter;
  }
}

Losses partition_losses(const TreeSuperstructure& tree, const Frontier& frontier,
                        const DatasetView& data) {
  Losses out;
  out.train = log_loss(tree, frontier, data, Partition::kTrain);
  std::vector<std::size_t> test = data.partition_indices(Partition::kTest);
  out.test = test.empty() ? kNaN : log_loss(tree, frontier, data, test);
  return out;
}

void log_iteration(std::ostream* os, const IterationRecord& rec, int total) {
  if (!os) return;
  std::ostream& out = *os;
  out << "[iter " << rec.iteration << "/" << total << "] tau=" << std::setprecision(6)
      << rec.tau_start << " posterior=[";
  for (std::size_t j = 0; j < rec.posterior.size(); ++j)
    out << (j ? " " : "") << std::setprecision(4) << rec.posterior[j];
  out << "] chose=" << to_string(rec.chosen_kind);
  if (rec.chosen_target)
    out << " target=" << *rec.chosen_target;
  else if (rec.chosen_degenerate)
    out << " target=none(degenerate)";
  out << " p=" << std::setprecision(4) << rec.chosen_probability
      << " train_loss=" << std::setprecision(6) << rec.train_loss;
  if (!std::isnan(rec.test_loss)) out << " test_loss=" << rec.test_loss;
  out << '\n';
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(step_size > 0.0)) throw std::invalid_argument("step_size must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (epochs_per_iteration < 1) throw std::invalid_argument("epochs_per_iteration must be >= 1");
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (baseline_epochs < 1) throw std::invalid_argument("baseline_epochs must be >= 1");
  if (finetune_epochs < 0) throw std::invalid_argument("finetune_epochs must be >= 0");
  if (depth_cap < 1 || depth_cap > 16) throw std::invalid_argument("depth_cap must be in [1, 16]");
  if (start_depth < 1 || start_depth > depth_cap)
    throw std::invalid_argument("start_depth must be in [1, depth_cap]");
  if (!(tau0 > 0.0)) throw std::invalid_argument("tau0 must be > 0");
  if (!(discount > 0.0 && discount <= 1.0)) throw std::invalid_argument("discount must be in (0, 1]");
}

double combined_loss(const TreeSuperstructure& tree, const CandidateSet& candidates,
                     const GatingState& gating, const DatasetView& data,
                     std::span<const std::size_t> rows) {
  if (rows.empty()) throw EmptyPartitionError("combined_loss over an empty batch");
  const std::vector<double> g = weights(gating);
  double total = 0.0;
  for (std::size_t i : rows) {
    std::span<const double> x = data.row(i);
    const int y = data.labels[i];
    double m = 0.0;
    for (std::size_t j = 0; j < candidates.size(); ++j)
      m += g[j] * true_class_probability(tree, candidates.variants[j].frontier, x, y);
    total += -std::log(std::max(m, kProbabilityClamp));
  }
  return total / static_cast<double>(rows.size());
}

double combined_loss(const SearchState& state, const DatasetView& data,
                     std::span<const std::size_t> rows) {
  return combined_loss(state.super, state.candidates, state.gating, data, rows);
}

CombinedGradients combined_backward(const TreeSuperstructure& tree, const CandidateSet& candidates,
                                    const GatingState& gating, const DatasetView& data,
                                    std::span<const std::size_t> rows) {
  if (rows.empty()) throw EmptyPartitionError("combined_backward over an empty batch");
  CombinedGradients out{TreeGradients(tree), std::vector<double>(candidates.size(), 0.0)};
  accumulate_combined(tree, candidates, gating, data, rows, out.tree, out.gating);
  return out;
}

void sgd_epoch(SearchState& state, const DatasetView& data, const OptimizerConfig& config) {
  std::vector<std::size_t> order = require_train_rows(data);
  state.rng.shuffle(order);

  TreeGradients grads(state.super);
  std::vector<double> gating_grad(state.candidates.size(), 0.0);
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t len = std::min(bs, order.size() - start);
    std::span<const std::size_t> batch(order.data() + start, len);
    grads.clear();
    std::fill(gating_grad.begin(), gating_grad.end(), 0.0);
    accumulate_combined(state.super, state.candidates, state.gating, data, batch, grads,
                        gating_grad);
    apply_update(state.super, grads, config.step_size);
    for (std::size_t k = 0; k < gating_grad.size(); ++k)
      state.gating.logits[k] -= config.step_size * gating_grad[k];
  }
}

std::pair<SearchState, RunReport> search(const DatasetView& data, const OptimizerConfig& config,
                                         const SearchHooks& hooks) {
  config.validate();
  const std::vector<std::size_t> train_rows = require_train_rows(data);

  Rng rng(config.seed);
  TreeSuperstructure super(config.start_depth, static_cast<int>(data.feature_dim()),
                           data.class_count, config.depth_cap, rng);
  SearchState state{std::move(super),
                    Frontier::full_depth(config.start_depth),
                    {},
                    GatingState::uniform(3, config.tau0),
                    config.schedule(),
                    0,
                    rng};

  RunReport report;
  double tau = config.tau0;
  for (int t = 1; t <= config.iterations; ++t) {
    state.candidates = sample_candidates(state.base, state.super, state.rng);
    state.gating = GatingState::uniform(state.candidates.size(), tau);

    for (int e = 0; e < config.epochs_per_iteration; ++e) {
      sgd_epoch(state, data, config);
      ++report.total_epochs;
    }
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);
    report.total_batches +=
        static_cast<std::uint64_t>(config.epochs_per_iteration) * ((train_rows.size() + bs - 1) / bs);

    const std::vector<double> pi = posterior(state.gating);
    const std::size_t pick = hooks.pick_override ? hooks.pick_override(t, state.candidates, pi)
                                                 : state.rng.pick_weighted(pi);
    const Variant& chosen = state.candidates.variants[pick];
    state.base = commit(chosen);
    state.gating = anneal(state.gating, state.schedule);
    state.iteration = t;

    IterationRecord rec;
    rec.iteration = t;
    rec.tau_start = tau;
    rec.tau_end = state.gating.temperature;
    rec.posterior = pi;
    rec.chosen_kind = chosen.kind;
    rec.chosen_target = chosen.target;
    rec.chosen_degenerate = chosen.degenerate;
    rec.chosen_probability = pi[pick];
    Losses losses = partition_losses(state.super, state.base, data);
    rec.train_loss = losses.train;
    rec.test_loss = losses.test;
    log_iteration(hooks.log, rec, config.iterations);
    report.iterations.push_back(std::move(rec));

    tau = state.gating.temperature;
  }

  report.final_frontier.assign(state.base.leaves().begin(), state.base.leaves().end());
  report.search_train_loss = report.iterations.back().train_loss;
  report.search_test_loss = report.iterations.back().test_loss;
  report.finetune_train_loss = kNaN;
  report.finetune_test_loss = kNaN;
  return {std::move(state), std::move(report)};
}

Losses finetune(SearchState& state, const DatasetView& data, const OptimizerConfig& config,
                const SearchHooks& hooks) {
  const std::vector<std::size_t> rows = require_train_rows(data);
  TreeGradients grads(state.super);
  for (int e = 0; e < config.finetune_epochs; ++e)
    single_frontier_epoch(state.super, state.base, data, rows, config, state.rng, grads, nullptr);
  Losses losses = partition_losses(state.super, state.base, data);
  if (hooks.log)
    *hooks.log << "[finetune] epochs=" << config.finetune_epochs << " train_loss=" << losses.train
               << " test_loss=" << losses.test << '\n';
  return losses;
}

std::pair<TreeModel, Losses> train_baseline(const DatasetView& data,
                                            const OptimizerConfig& config) {
  config.validate();
  const std::vector<std::size_t> rows = require_train_rows(data);
  Rng rng(config.seed);
  TreeSuperstructure super(config.start_depth, static_cast<int>(data.feature_dim()),
                           data.class_count, config.depth_cap, rng);
  Frontier frontier = Frontier::full_depth(config.start_depth);
  TreeGradients grads(super);
  for (int e = 0; e < config.baseline_epochs; ++e)
    single_frontier_epoch(super, frontier, data, rows, config, rng, grads, nullptr);
  Losses losses = partition_losses(super, frontier, data);
  return {TreeModel{std::move(super), std::move(frontier)}, losses};
}

double relative_improvement(double baseline_loss, double model_loss) {
  if (!(baseline_loss > 0.0))
    throw NonpositiveBaselineError("baseline loss must be > 0 to report relative improvement");
  return 100.0 * (baseline_loss - model_loss) / baseline_loss;
}

TrainedTree train_tree(const DatasetView& data, const OptimizerConfig& config,
                       const SearchHooks& hooks) {
  auto [state, report] = search(data, config, hooks);
  TrainedTree out;
  out.after_search = TreeModel{state.super, state.base};
  out.search_losses = {report.search_train_loss, report.search_test_loss};
  out.finetune_losses = finetune(state, data, config, hooks);
  report.finetune_train_loss = out.finetune_losses.train;
  report.finetune_test_loss = out.finetune_losses.test;
  out.after_finetune = TreeModel{std::move(state.super), std::move(state.base)};
  out.report = std::move(report);
  return out;
}

Losses evaluate(const TreeModel& model, const DatasetView& data) {
  return partition_losses(model.super, model.frontier, data);
}

}  // namespace ndt
