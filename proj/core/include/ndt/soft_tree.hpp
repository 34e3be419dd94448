#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ndt/dataset.hpp"
#include "ndt/rng.hpp"

namespace ndt {

/// Heap-ordered node index: root is 0, children of i are 2i+1 and 2i+2.
using NodeId = std::int32_t;

constexpr NodeId kRootId = 0;
inline NodeId left_child(NodeId n) { return 2 * n + 1; }
inline NodeId right_child(NodeId n) { return 2 * n + 2; }
inline NodeId parent_of(NodeId n) { return (n - 1) / 2; }
inline int node_depth(NodeId n) {
  int d = 0;
  for (NodeId m = n; m > 0; m = parent_of(m)) ++d;
  return d;
}
inline std::size_t nodes_for_depth(int depth) { return (std::size_t{2} << depth) - 1; }

/// Oblique split: routes right with probability sigmoid(weights . x + bias).
struct SplitParams {
  std::vector<double> weights;
  double bias = 0.0;
};

struct LeafLogits {
  std::vector<double> logits;
};

/// The set of nodes where a routing variant stops and classifies. Always an
/// antichain that covers every root-to-bottom path exactly once; construction
/// validates both.
class Frontier {
 public:
  Frontier() : leaves_{kRootId} {}
  explicit Frontier(std::vector<NodeId> leaves);

  static Frontier single_root() { return Frontier{}; }
  static Frontier full_depth(int depth);

  std::span<const NodeId> leaves() const { return leaves_; }
  std::size_t size() const { return leaves_.size(); }
  bool contains(NodeId n) const;
  int max_depth() const;

  /// Replace the two children of `internal` with the node itself. Both
  /// children must currently be frontier leaves.
  Frontier pruned_at(NodeId internal) const;
  /// Replace frontier leaf `leaf` with its two children.
  Frontier grafted_at(NodeId leaf) const;

  bool operator==(const Frontier& other) const { return leaves_ == other.leaves_; }

 private:
  std::vector<NodeId> leaves_;  // sorted, unique
};

/// Complete binary tree of parameters over which every routing variant
/// operates. Each node owns both an oblique split and a leaf-classifier logit
/// vector, so frontiers can move without any reallocation or copying.
/// Storage grows lazily one level at a time up to depth_cap.
class TreeSuperstructure {
 public:
  /// Empty shell; only a valid assignment / deserialization target.
  TreeSuperstructure() = default;

  /// Split weights start uniform in [-1/sqrt(p), 1/sqrt(p)] (consumed from
  /// rng in node order), biases and leaf logits start at zero.
  TreeSuperstructure(int depth, int feature_dim, int class_count, int depth_cap, Rng& rng);

  /// Rebuild from explicit parameter arrays (deserialization).
  static TreeSuperstructure from_parts(int depth, int feature_dim, int class_count, int depth_cap,
                                       std::vector<SplitParams> splits,
                                       std::vector<LeafLogits> leaves);

  int allocated_depth() const { return allocated_depth_; }
  int depth_cap() const { return depth_cap_; }
  int feature_dim() const { return feature_dim_; }
  int class_count() const { return class_count_; }
  std::size_t node_count() const { return splits_.size(); }

  SplitParams& split(NodeId n) { return splits_[static_cast<std::size_t>(n)]; }
  const SplitParams& split(NodeId n) const { return splits_[static_cast<std::size_t>(n)]; }
  LeafLogits& leaf(NodeId n) { return leaves_[static_cast<std::size_t>(n)]; }
  const LeafLogits& leaf(NodeId n) const { return leaves_[static_cast<std::size_t>(n)]; }

  /// Allocate levels up to `depth` (zero-initialized; graft initialization
  /// overwrites whatever matters before the nodes are ever routed). Throws
  /// CapacityExceededError beyond depth_cap.
  void grow_to_depth(int depth);

  bool operator==(const TreeSuperstructure&) const;

 private:
  int allocated_depth_ = 0;
  int depth_cap_ = 0;
  int feature_dim_ = 0;
  int class_count_ = 0;
  std::vector<SplitParams> splits_;
  std::vector<LeafLogits> leaves_;
};

double sigmoid(double x);

/// Probability of routing RIGHT at `node`: sigmoid(w . x + b).
double route_probability(const TreeSuperstructure& tree, NodeId node, std::span<const double> x);

/// Product of routing factors along the root-to-leaf path. Throws
/// LeafNotInFrontierError when `leaf` is not a member of `frontier`.
double path_probability(const TreeSuperstructure& tree, const Frontier& frontier, NodeId leaf,
                        std::span<const double> x);

/// Mixture of leaf-classifier softmaxes weighted by path probability.
std::vector<double> predict(const TreeSuperstructure& tree, const Frontier& frontier,
                            std::span<const double> x);
void predict_into(const TreeSuperstructure& tree, const Frontier& frontier,
                  std::span<const double> x, std::span<double> out);

/// Probability assigned to the true class only; cheaper than a full predict.
double true_class_probability(const TreeSuperstructure& tree, const Frontier& frontier,
                              std::span<const double> x, int label);

/// Mean over the rows of -log p(y | x), probabilities clamped below at
/// kProbabilityClamp before the log.
double log_loss(const TreeSuperstructure& tree, const Frontier& frontier, const DatasetView& data,
                std::span<const std::size_t> rows);
double log_loss(const TreeSuperstructure& tree, const Frontier& frontier, const DatasetView& data,
                Partition partition);

constexpr double kProbabilityClamp = 1e-12;

/// Gradient buffer with the same heap layout as the superstructure. Entries
/// for nodes no variant routes through stay exactly zero.
class TreeGradients {
 public:
  TreeGradients() = default;
  explicit TreeGradients(const TreeSuperstructure& tree) { resize_like(tree); }

  void resize_like(const TreeSuperstructure& tree);
  void clear();

  SplitParams& split(NodeId n) { return splits_[static_cast<std::size_t>(n)]; }
  const SplitParams& split(NodeId n) const { return splits_[static_cast<std::size_t>(n)]; }
  LeafLogits& leaf(NodeId n) { return leaves_[static_cast<std::size_t>(n)]; }
  const LeafLogits& leaf(NodeId n) const { return leaves_[static_cast<std::size_t>(n)]; }
  std::size_t node_count() const { return splits_.size(); }

 private:
  std::vector<SplitParams> splits_;
  std::vector<LeafLogits> leaves_;
};

/// Accumulate d(coeff * p(label | x))/dtheta into `grads`, where p is this
/// frontier's probability for the true class. Passing coeff = dLoss/dp makes
/// this the chain-rule building block shared by the single-tree and the
/// gated multi-variant losses. Returns p(label | x).
double accumulate_prediction_gradient(const TreeSuperstructure& tree, const Frontier& frontier,
                                      std::span<const double> x, int label, double coeff,
                                      TreeGradients& grads);

/// Exact analytic gradient of the batch-mean log-loss of a single frontier.
TreeGradients backward(const TreeSuperstructure& tree, const Frontier& frontier,
                       const DatasetView& data, std::span<const std::size_t> rows);

}  // namespace ndt
