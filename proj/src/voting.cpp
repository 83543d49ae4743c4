#include "trinoloc/voting.hpp"

#include <string>

namespace trinoloc {

VotingCost voting_cost(const LocalFeatureMap& query, const LocalFeatureMap& reference) {
  if (query.dim() != reference.dim() || query.point_count() != reference.point_count())
    throw ValidationError(
        "feature map shape mismatch: query " + std::to_string(query.dim()) + "x" +
        std::to_string(query.point_count()) + " vs reference " +
        std::to_string(reference.dim()) + "x" + std::to_string(reference.point_count()));
  if (query.source_view != reference.source_view)
    throw ValidationError("view mismatch: query " + std::string(view_name(query.source_view)) +
                          " vs reference " + std::string(view_name(reference.source_view)));

  double sum = 0.0;
  for (int i = 0; i < query.point_count(); ++i)
    sum += (query.points.col(i).cast<double>() - reference.points.col(i).cast<double>())
               .norm();
  return VotingCost{sum, query.source_view, query.point_count()};
}

double total_cost(const VotingCost& front, const VotingCost& left,
                  const VotingCost& right, const AdaptiveWeight& weight) {
  if (front.view != View::front || left.view != View::left || right.view != View::right)
    throw ValidationError("total_cost expects costs tagged front/left/right, got " +
                          std::string(view_name(front.view)) + "/" +
                          std::string(view_name(left.view)) + "/" +
                          std::string(view_name(right.view)));
  return weight.alpha * front.value + (1.0 - weight.alpha) / 2.0 * (left.value + right.value);
}

}  // namespace trinoloc
