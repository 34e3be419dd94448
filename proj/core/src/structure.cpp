#include "ndt/structure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ndt/errors.hpp"

namespace ndt {

std::string to_string(VariantKind kind) {
  switch (kind) {
    case VariantKind::kPruned: return "pruned";
    case VariantKind::kBase: return "base";
    case VariantKind::kGrafted: return "grafted";
  }
  return "?";
}

const Variant& CandidateSet::base() const {
  for (const Variant& v : variants)
    if (v.kind == VariantKind::kBase) return v;
  throw std::logic_error("candidate set has no base variant");
}

std::vector<NodeId> prunable_nodes(const Frontier& frontier) {
  std::vector<NodeId> out;
  for (NodeId leaf : frontier.leaves()) {
    if (leaf == kRootId) continue;
    // Visit each sibling pair once, from its left member.
    if (leaf != left_child(parent_of(leaf))) continue;
    if (frontier.contains(leaf + 1)) out.push_back(parent_of(leaf));
  }
  return out;
}

std::vector<NodeId> graftable_leaves(const Frontier& frontier, int depth_cap) {
  std::vector<NodeId> out;
  for (NodeId leaf : frontier.leaves())
    if (node_depth(leaf) < depth_cap) out.push_back(leaf);
  return out;
}

void apply_graft_init(TreeSuperstructure& tree, NodeId leaf, Rng& rng) {
  const int child_depth = node_depth(leaf) + 1;
  if (child_depth > tree.depth_cap())
    throw CapacityExceededError("graft at node " + std::to_string(leaf) +
                                " exceeds depth cap " + std::to_string(tree.depth_cap()));
  tree.grow_to_depth(child_depth);

  const double scale = 1.0 / std::sqrt(static_cast<double>(tree.feature_dim()));
  SplitParams& split = tree.split(leaf);
  for (double& w : split.weights) w = rng.uniform(-scale, scale);
  split.bias = 0.0;

  tree.leaf(left_child(leaf)).logits = tree.leaf(leaf).logits;
  tree.leaf(right_child(leaf)).logits = tree.leaf(leaf).logits;
}

CandidateSet sample_candidates(const Frontier& base, TreeSuperstructure& tree, Rng& rng) {
  CandidateSet set;
  set.variants.resize(3);

  Variant& pruned = set.variants[0];
  pruned.id = 0;
  pruned.kind = VariantKind::kPruned;
  std::vector<NodeId> prunable = prunable_nodes(base);
  if (prunable.empty()) {
    pruned.degenerate = true;
    pruned.frontier = base;
  } else {
    NodeId target = prunable[rng.below(prunable.size())];
    pruned.target = target;
    pruned.frontier = base.pruned_at(target);
  }

  Variant& mid = set.variants[1];
  mid.id = 1;
  mid.kind = VariantKind::kBase;
  mid.frontier = base;

  Variant& grafted = set.variants[2];
  grafted.id = 2;
  grafted.kind = VariantKind::kGrafted;
  std::vector<NodeId> graftable = graftable_leaves(base, tree.depth_cap());
  if (graftable.empty()) {
    grafted.degenerate = true;
    grafted.frontier = base;
  } else {
    NodeId target = graftable[rng.below(graftable.size())];
    grafted.target = target;
    grafted.frontier = base.grafted_at(target);
    apply_graft_init(tree, target, rng);
  }
  return set;
}

Frontier commit(const Variant& variant) { return variant.frontier; }

}  // namespace ndt
