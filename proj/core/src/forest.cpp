#include "ndt/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "ndt/errors.hpp"

namespace ndt {

void ForestConfig::validate() const {
  if (n_trees < 1) throw std::invalid_argument("n_trees must be >= 1");
  if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
  optimizer.validate();
}

std::vector<std::uint64_t> ForestConfig::member_seeds() const {
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(n_trees));
  for (std::size_t i = 0; i < seeds.size(); ++i)
    seeds[i] = derive_seed(optimizer.seed, i);
  for (std::size_t i = 0; i < seeds.size(); ++i)
    for (std::size_t j = i + 1; j < seeds.size(); ++j)
      if (seeds[i] == seeds[j]) throw std::logic_error("member seeds collide");
  return seeds;
}

TrainedForest train_forest(const DatasetView& data, const ForestConfig& config,
                           const SearchHooks& hooks) {
  config.validate();
  const std::vector<std::uint64_t> seeds = config.member_seeds();
  const std::size_t n = seeds.size();
  std::vector<TrainedTree> members(n);

  auto train_member = [&](std::size_t i) {
    OptimizerConfig member_config = config.optimizer;
    member_config.seed = seeds[i];
    // Member logs interleave unreadably across threads; keep hooks serial-only.
    SearchHooks member_hooks = hooks;
    if (config.parallelism > 1) member_hooks.log = nullptr;
    members[i] = train_tree(data, member_config, member_hooks);
  };

  if (config.parallelism <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) train_member(i);
  } else {
    std::vector<std::thread> pool;
    std::size_t next = 0;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.parallelism), n);
    std::mutex mu;
    std::exception_ptr first_error;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= n || first_error) return;
            i = next++;
          }
          try {
            train_member(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(mu);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  TrainedForest out;
  for (auto& m : members) {
    out.after_search.members.push_back(std::move(m.after_search));
    out.after_finetune.members.push_back(std::move(m.after_finetune));
    out.reports.push_back(std::move(m.report));
  }
  out.search_losses = evaluate(out.after_search, data);
  out.finetune_losses = evaluate(out.after_finetune, data);
  return out;
}

std::vector<double> forest_predict(const ForestModel& model, std::span<const double> x) {
  if (model.members.empty()) throw std::invalid_argument("forest has no members");
  std::vector<double> out(model.members[0].super.class_count(), 0.0);
  std::vector<double> member(out.size());
  for (const TreeModel& tree : model.members) {
    predict_into(tree.super, tree.frontier, x, member);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += member[c];
  }
  const double inv = 1.0 / static_cast<double>(model.members.size());
  for (double& v : out) v *= inv;
  return out;
}

double forest_log_loss(const ForestModel& model, const DatasetView& data,
                       std::span<const std::size_t> rows) {
  if (rows.empty()) throw EmptyPartitionError("forest_log_loss over an empty partition");
  double total = 0.0;
  for (std::size_t i : rows) {
    std::vector<double> dist = forest_predict(model, data.row(i));
    total += -std::log(std::max(dist[static_cast<std::size_t>(data.labels[i])], kProbabilityClamp));
  }
  return total / static_cast<double>(rows.size());
}

double forest_log_loss(const ForestModel& model, const DatasetView& data, Partition partition) {
  std::vector<std::size_t> rows = data.partition_indices(partition);
  return forest_log_loss(model, data, rows);
}

Losses evaluate(const ForestModel& model, const DatasetView& data) {
  Losses out;
  out.train = forest_log_loss(model, data, Partition::kTrain);
  std::vector<std::size_t> test = data.partition_indices(Partition::kTest);
  out.test = test.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : forest_log_loss(model, data, test);
  return out;
}

}  // namespace ndt
