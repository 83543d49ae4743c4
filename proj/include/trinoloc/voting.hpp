#pragma once

#include "trinoloc/descriptor.hpp"

namespace trinoloc {

inline constexpr double kDefaultAlpha = 0.4;

/// Summed per-point descriptor distance between a query map and a reference
/// map of the same view. Zero iff the maps are identical point for point.
struct VotingCost {
  double value = 0.0;
  View view = View::front;
  int point_count = 0;
};

/// Mixing weight between the front cost and the averaged side costs.
struct AdaptiveWeight {
  double alpha = kDefaultAlpha;

  AdaptiveWeight() = default;
  explicit AdaptiveWeight(double a) : alpha(a) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw ValidationError("alpha out of range [0, 1]: " + std::to_string(a));
  }
};

/// Sum over grid positions i of the Euclidean distance between the i-th
/// query point and the i-th reference point. Correspondence is positional:
/// cell i of the query matches cell i of the reference.
VotingCost voting_cost(const LocalFeatureMap& query, const LocalFeatureMap& reference);

/// alpha * S_front + (1 - alpha) / 2 * (S_left + S_right).
double total_cost(const VotingCost& front, const VotingCost& left,
                  const VotingCost& right, const AdaptiveWeight& weight);

}  // namespace trinoloc
