#pragma once

#include <span>
#include <vector>

#include "ndt/structure.hpp"

namespace ndt {

/// Free logits over the candidate variants plus the softmax temperature.
/// weights() always lands on the simplex, so the stacking constraint
/// (nonnegative, sums to one) holds by construction.
struct GatingState {
  std::vector<double> logits;
  double temperature = 1.0;

  static GatingState uniform(std::size_t k, double temperature) {
    return {std::vector<double>(k, 0.0), temperature};
  }
};

struct AnnealSchedule {
  double tau0 = 1.0;
  double discount = 0.99;
};

/// softmax(logits / temperature), computed with max-subtraction.
std::vector<double> weights(const GatingState& state);

/// One annealing step: temperature <- temperature * discount.
GatingState anneal(GatingState state, const AnnealSchedule& schedule);

/// The gating weights read as the model posterior p(h | x_t, theta_t); this
/// is the distribution the search samples its perturbation from.
std::vector<double> posterior(const GatingState& state);

/// Gated mixture of the candidates' predictions. Weights do not depend on x:
/// every instance is routed the same way (stacking, not per-instance gating).
std::vector<double> combined_predict(const TreeSuperstructure& tree,
                                     const CandidateSet& candidates, const GatingState& state,
                                     std::span<const double> x);

}  // namespace ndt
