#include "ndt/soft_tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ndt/errors.hpp"

namespace ndt {

namespace {

void check_frontier_fits(const TreeSuperstructure& tree, const Frontier& frontier) {
  // leaves are sorted, so the back is the largest id routed through.
  if (static_cast<std::size_t>(frontier.leaves().back()) >= tree.node_count())
    throw std::invalid_argument("frontier exceeds the superstructure's allocated nodes");
}

double dot_plus_bias(const SplitParams& s, std::span<const double> x) {
  double acc = s.bias;
  for (std::size_t j = 0; j < x.size(); ++j) acc += s.weights[j] * x[j];
  return acc;
}

// Scratch shared by the softmax helpers; training is confined to one thread
// per superstructure and forest members run on their own threads, so
// thread_local is safe here.
thread_local std::vector<double> tl_softmax_buf;

void softmax_into(std::span<const double> logits, std::vector<double>& out) {
  out.resize(logits.size());
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double denom = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out[c] = std::exp(logits[c] - m);
    denom += out[c];
  }
  for (double& v : out) v /= denom;
}

double softmax_at(std::span<const double> logits, int index) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double denom = 0.0;
  for (double v : logits) denom += std::exp(v - m);
  return std::exp(logits[static_cast<std::size_t>(index)] - m) / denom;
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Frontier

Frontier::Frontier(std::vector<NodeId> leaves) : leaves_(std::move(leaves)) {
  if (leaves_.empty()) throw std::invalid_argument("frontier must be nonempty");
  std::sort(leaves_.begin(), leaves_.end());
  if (std::adjacent_find(leaves_.begin(), leaves_.end()) != leaves_.end())
    throw std::invalid_argument("frontier has duplicate nodes");
  if (leaves_.front() < 0) throw std::invalid_argument("negative node id in frontier");

  // Antichain: no member may be an ancestor of another.
  for (NodeId leaf : leaves_) {
    for (NodeId a = leaf; a > 0;) {
      a = parent_of(a);
      if (contains(a)) throw std::invalid_argument("frontier node " + std::to_string(a) +
                                                   " is an ancestor of " + std::to_string(leaf));
    }
  }

  // Cover: subtree measures must sum to exactly 1. With the antichain
  // property established the integer sum below cannot overflow.
  constexpr int kMeasureDepth = 62;
  std::uint64_t measure = 0;
  for (NodeId leaf : leaves_) {
    int d = node_depth(leaf);
    if (d > kMeasureDepth) throw std::invalid_argument("frontier node too deep");
    measure += std::uint64_t{1} << (kMeasureDepth - d);
  }
  if (measure != (std::uint64_t{1} << kMeasureDepth))
    throw std::invalid_argument("frontier does not cover every root-to-bottom path");
}

Frontier Frontier::full_depth(int depth) {
  if (depth < 0) throw std::invalid_argument("depth must be >= 0");
  std::vector<NodeId> leaves;
  NodeId first = static_cast<NodeId>((std::size_t{1} << depth) - 1);
  NodeId last = static_cast<NodeId>((std::size_t{2} << depth) - 2);
  for (NodeId n = first; n <= last; ++n) leaves.push_back(n);
  return Frontier(std::move(leaves));
}

bool Frontier::contains(NodeId n) const {
  return std::binary_search(leaves_.begin(), leaves_.end(), n);
}

int Frontier::max_depth() const {
  int d = 0;
  for (NodeId n : leaves_) d = std::max(d, node_depth(n));
  return d;
}

Frontier Frontier::pruned_at(NodeId internal) const {
  if (!contains(left_child(internal)) || !contains(right_child(internal)))
    throw std::invalid_argument("prune target's children are not both frontier leaves");
  std::vector<NodeId> next;
  next.reserve(leaves_.size() - 1);
  for (NodeId n : leaves_)
    if (n != left_child(internal) && n != right_child(internal)) next.push_back(n);
  next.push_back(internal);
  return Frontier(std::move(next));
}

Frontier Frontier::grafted_at(NodeId leaf) const {
  if (!contains(leaf)) throw LeafNotInFrontierError("graft target is not a frontier leaf");
  std::vector<NodeId> next;
  next.reserve(leaves_.size() + 1);
  for (NodeId n : leaves_)
    if (n != leaf) next.push_back(n);
  next.push_back(left_child(leaf));
  next.push_back(right_child(leaf));
  return Frontier(std::move(next));
}

// ---------------------------------------------------------------------------
// TreeSuperstructure

TreeSuperstructure::TreeSuperstructure(int depth, int feature_dim, int class_count, int depth_cap,
                                       Rng& rng)
    : allocated_depth_(depth),
      depth_cap_(depth_cap),
      feature_dim_(feature_dim),
      class_count_(class_count) {
  if (depth < 1 || depth > depth_cap) throw std::invalid_argument("need 1 <= depth <= depth_cap");
  if (depth_cap > 24) throw std::invalid_argument("depth_cap too large");
  if (feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
  if (class_count < 2) throw std::invalid_argument("class_count must be >= 2");

  const std::size_t n = nodes_for_depth(depth);
  const double scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  splits_.resize(n);
  leaves_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    splits_[i].weights.resize(static_cast<std::size_t>(feature_dim));
    for (double& w : splits_[i].weights) w = rng.uniform(-scale, scale);
    splits_[i].bias = 0.0;
    leaves_[i].logits.assign(static_cast<std::size_t>(class_count), 0.0);
  }
}

TreeSuperstructure TreeSuperstructure::from_parts(int depth, int feature_dim, int class_count,
                                                  int depth_cap, std::vector<SplitParams> splits,
                                                  std::vector<LeafLogits> leaves) {
  if (depth < 1 || depth > depth_cap) throw std::invalid_argument("need 1 <= depth <= depth_cap");
  const std::size_t n = nodes_for_depth(depth);
  if (splits.size() != n || leaves.size() != n)
    throw std::invalid_argument("node array size does not match depth");
  for (const auto& s : splits)
    if (s.weights.size() != static_cast<std::size_t>(feature_dim))
      throw std::invalid_argument("split weight length does not match feature_dim");
  for (const auto& l : leaves)
    if (l.logits.size() != static_cast<std::size_t>(class_count))
      throw std::invalid_argument("leaf logit length does not match class_count");
  TreeSuperstructure tree;
  tree.allocated_depth_ = depth;
  tree.depth_cap_ = depth_cap;
  tree.feature_dim_ = feature_dim;
  tree.class_count_ = class_count;
  tree.splits_ = std::move(splits);
  tree.leaves_ = std::move(leaves);
  return tree;
}

void TreeSuperstructure::grow_to_depth(int depth) {
  if (depth <= allocated_depth_) return;
  if (depth > depth_cap_)
    throw CapacityExceededError("cannot grow to depth " + std::to_string(depth) +
                                " (cap is " + std::to_string(depth_cap_) + ")");
  const std::size_t n = nodes_for_depth(depth);
  const std::size_t old = splits_.size();
  splits_.resize(n);
  leaves_.resize(n);
  for (std::size_t i = old; i < n; ++i) {
    splits_[i].weights.assign(static_cast<std::size_t>(feature_dim_), 0.0);
    splits_[i].bias = 0.0;
    leaves_[i].logits.assign(static_cast<std::size_t>(class_count_), 0.0);
  }
  allocated_depth_ = depth;
}

bool TreeSuperstructure::operator==(const TreeSuperstructure& o) const {
  if (allocated_depth_ != o.allocated_depth_ || depth_cap_ != o.depth_cap_ ||
      feature_dim_ != o.feature_dim_ || class_count_ != o.class_count_ ||
      splits_.size() != o.splits_.size())
    return false;
  for (std::size_t i = 0; i < splits_.size(); ++i) {
    if (splits_[i].weights != o.splits_[i].weights || splits_[i].bias != o.splits_[i].bias)
      return false;
    if (leaves_[i].logits != o.leaves_[i].logits) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Forward

double route_probability(const TreeSuperstructure& tree, NodeId node, std::span<const double> x) {
  return sigmoid(dot_plus_bias(tree.split(node), x));
}

double path_probability(const TreeSuperstructure& tree, const Frontier& frontier, NodeId leaf,
                        std::span<const double> x) {
  check_frontier_fits(tree, frontier);
  if (!frontier.contains(leaf))
    throw LeafNotInFrontierError("node " + std::to_string(leaf) + " is not a frontier leaf");
  double prob = 1.0;
  for (NodeId n = leaf; n > 0;) {
    NodeId p = parent_of(n);
    double r = route_probability(tree, p, x);
    prob *= (n == right_child(p)) ? r : (1.0 - r);
    n = p;
  }
  return prob;
}

namespace {

// Shared descent: visits frontier leaves with their path probability.
template <typename LeafFn>
void walk_frontier(const TreeSuperstructure& tree, const Frontier& frontier,
                   std::span<const double> x, NodeId node, double path, LeafFn&& on_leaf) {
  if (frontier.contains(node)) {
    on_leaf(node, path);
    return;
  }
  double r = route_probability(tree, node, x);
  walk_frontier(tree, frontier, x, left_child(node), path * (1.0 - r), on_leaf);
  walk_frontier(tree, frontier, x, right_child(node), path * r, on_leaf);
}

}  // namespace

void predict_into(const TreeSuperstructure& tree, const Frontier& frontier,
                  std::span<const double> x, std::span<double> out) {
  check_frontier_fits(tree, frontier);
  std::fill(out.begin(), out.end(), 0.0);
  walk_frontier(tree, frontier, x, kRootId, 1.0, [&](NodeId leaf, double path) {
    softmax_into(tree.leaf(leaf).logits, tl_softmax_buf);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += path * tl_softmax_buf[c];
  });
}

std::vector<double> predict(const TreeSuperstructure& tree, const Frontier& frontier,
                            std::span<const double> x) {
  std::vector<double> out(static_cast<std::size_t>(tree.class_count()));
  predict_into(tree, frontier, x, out);
  return out;
}

double true_class_probability(const TreeSuperstructure& tree, const Frontier& frontier,
                              std::span<const double> x, int label) {
  check_frontier_fits(tree, frontier);
  double p = 0.0;
  walk_frontier(tree, frontier, x, kRootId, 1.0, [&](NodeId leaf, double path) {
    p += path * softmax_at(tree.leaf(leaf).logits, label);
  });
  return p;
}

double log_loss(const TreeSuperstructure& tree, const Frontier& frontier, const DatasetView& data,
                std::span<const std::size_t> rows) {
  if (rows.empty()) throw EmptyPartitionError("log_loss over an empty partition");
  double total = 0.0;
  for (std::size_t i : rows) {
    double p = true_class_probability(tree, frontier, data.row(i), data.labels[i]);
    total += -std::log(std::max(p, kProbabilityClamp));
  }
  return total / static_cast<double>(rows.size());
}

double log_loss(const TreeSuperstructure& tree, const Frontier& frontier, const DatasetView& data,
                Partition partition) {
  std::vector<std::size_t> rows = data.partition_indices(partition);
  return log_loss(tree, frontier, data, rows);
}

// ---------------------------------------------------------------------------
// Backward

void TreeGradients::resize_like(const TreeSuperstructure& tree) {
  splits_.resize(tree.node_count());
  leaves_.resize(tree.node_count());
  for (std::size_t i = 0; i < splits_.size(); ++i) {
    splits_[i].weights.assign(static_cast<std::size_t>(tree.feature_dim()), 0.0);
    splits_[i].bias = 0.0;
    leaves_[i].logits.assign(static_cast<std::size_t>(tree.class_count()), 0.0);
  }
}

void TreeGradients::clear() {
  for (auto& s : splits_) {
    std::fill(s.weights.begin(), s.weights.end(), 0.0);
    s.bias = 0.0;
  }
  for (auto& l : leaves_) std::fill(l.logits.begin(), l.logits.end(), 0.0);
}

namespace {

// Returns V(node): the true-class probability mass of the subtree, given
// arrival probability U. Applies gradient contributions on the way back up.
//
// For a frontier leaf with softmax output q:
//   d p_y / d logit_c = U * q_y * (delta_{cy} - q_c)
// For an internal node with routing r = sigmoid(s):
//   d p_y / d s = U * r * (1 - r) * (V_right - V_left)
double walk_gradient(const TreeSuperstructure& tree, const Frontier& frontier,
                     std::span<const double> x, int label, double coeff, NodeId node, double U,
                     TreeGradients& grads) {
  if (frontier.contains(node)) {
    softmax_into(tree.leaf(node).logits, tl_softmax_buf);
    const double qy = tl_softmax_buf[static_cast<std::size_t>(label)];
    auto& g = grads.leaf(node).logits;
    const double scale = coeff * U * qy;
    for (std::size_t c = 0; c < g.size(); ++c) g[c] -= scale * tl_softmax_buf[c];
    g[static_cast<std::size_t>(label)] += scale;
    return qy;
  }
  const double r = route_probability(tree, node, x);
  const double vl =
      walk_gradient(tree, frontier, x, label, coeff, left_child(node), U * (1.0 - r), grads);
  const double vr =
      walk_gradient(tree, frontier, x, label, coeff, right_child(node), U * r, grads);
  const double f = coeff * U * r * (1.0 - r) * (vr - vl);
  auto& g = grads.split(node);
  for (std::size_t j = 0; j < x.size(); ++j) g.weights[j] += f * x[j];
  g.bias += f;
  return (1.0 - r) * vl + r * vr;
}

}  // namespace

double accumulate_prediction_gradient(const TreeSuperstructure& tree, const Frontier& frontier,
                                      std::span<const double> x, int label, double coeff,
                                      TreeGradients& grads) {
  check_frontier_fits(tree, frontier);
  return walk_gradient(tree, frontier, x, label, coeff, kRootId, 1.0, grads);
}

TreeGradients backward(const TreeSuperstructure& tree, const Frontier& frontier,
                       const DatasetView& data, std::span<const std::size_t> rows) {
  if (rows.empty()) throw EmptyPartitionError("backward over an empty batch");
  TreeGradients grads(tree);
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (std::size_t i : rows) {
    std::span<const double> x = data.row(i);
    const int y = data.labels[i];
    const double p = true_class_probability(tree, frontier, x, y);
    // -log(max(p, clamp)): flat (zero gradient) once the clamp is active.
    const double coeff = p > kProbabilityClamp ? -inv_n / p : 0.0;
    accumulate_prediction_gradient(tree, frontier, x, y, coeff, grads);
  }
  return grads;
}

}  // namespace ndt
