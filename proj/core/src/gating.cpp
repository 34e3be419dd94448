#include "ndt/gating.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ndt {

std::vector<double> weights(const GatingState& state) {
  if (state.logits.empty()) throw std::invalid_argument("gating state has no logits");
  if (!(state.temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  std::vector<double> out(state.logits.size());
  double m = state.logits[0];
  for (double y : state.logits) m = std::max(m, y);
  double denom = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = std::exp((state.logits[j] - m) / state.temperature);
    denom += out[j];
  }
  for (double& v : out) v /= denom;
  return out;
}

GatingState anneal(GatingState state, const AnnealSchedule& schedule) {
  state.temperature *= schedule.discount;
  return state;
}

std::vector<double> posterior(const GatingState& state) { return weights(state); }

std::vector<double> combined_predict(const TreeSuperstructure& tree,
                                     const CandidateSet& candidates, const GatingState& state,
                                     std::span<const double> x) {
  std::vector<double> pi = weights(state);
  if (pi.size() != candidates.size())
    throw std::invalid_argument("gating dimension does not match candidate count");
  std::vector<double> out(static_cast<std::size_t>(tree.class_count()), 0.0);
  std::vector<double> member(out.size());
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    predict_into(tree, candidates.variants[j].frontier, x, member);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += pi[j] * member[c];
  }
  return out;
}

}  // namespace ndt
