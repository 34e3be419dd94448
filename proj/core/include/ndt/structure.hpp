#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ndt/rng.hpp"
#include "ndt/soft_tree.hpp"

namespace ndt {

using VariantId = int;

enum class VariantKind { kPruned, kBase, kGrafted };

std::string to_string(VariantKind kind);

/// One routing over the shared superstructure. A degenerate variant is a
/// prune/graft slot with no legal target this round; it keeps the base
/// frontier so the candidate count and gating dimension stay fixed.
struct Variant {
  VariantId id = 0;
  VariantKind kind = VariantKind::kBase;
  std::optional<NodeId> target;  // engaged for real prunes/grafts only
  bool degenerate = false;
  Frontier frontier;
};

struct CandidateSet {
  std::vector<Variant> variants;  // [pruned, base, grafted]

  std::size_t size() const { return variants.size(); }
  const Variant& base() const;
};

/// Internal nodes whose two children are both frontier leaves; pruning one
/// removes exactly one split.
std::vector<NodeId> prunable_nodes(const Frontier& frontier);

/// Frontier leaves strictly above the depth cap, i.e. with room to graft.
std::vector<NodeId> graftable_leaves(const Frontier& frontier, int depth_cap);

/// Copy the target leaf's logits onto both children and draw a fresh split
/// for the target (uniform in +-1/sqrt(p), zero bias). Because both children
/// then predict exactly what the parent predicted, the grafted routing is
/// prediction-preserving no matter where the new split sends an input. Grows
/// the superstructure by one level when the children are not yet allocated;
/// throws CapacityExceededError at the depth cap.
void apply_graft_init(TreeSuperstructure& tree, NodeId leaf, Rng& rng);

/// Draw one prune target and one graft target uniformly at random and build
/// the three candidate routings [pruned, base, grafted] over the shared
/// superstructure. Slots without a legal target degrade to base duplicates.
/// Draw order is fixed (prune, graft, then graft-init weights) so a seeded
/// rng reproduces the same set.
CandidateSet sample_candidates(const Frontier& base, TreeSuperstructure& tree, Rng& rng);

/// Adopt the variant's frontier as the next base architecture. Parameters are
/// never touched; weight transfer is implicit in the shared superstructure.
Frontier commit(const Variant& variant);

}  // namespace ndt
