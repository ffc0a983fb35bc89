#pragma once

#include <utility>
#include <vector>

namespace mcmil {

/// Aggregated bag score with gradient-routing coefficients. Contributor
/// weights are nonnegative and sum to 1.
struct BagPrediction {
  double score = 0.0;
  std::vector<std::pair<int, double>> contributors;  // (patch index, weight)
  std::vector<double> patch_scores;
};

/// Bag score = max of patch scores; the lone contributor is the argmax,
/// ties broken by lowest index. Throws std::invalid_argument on empty input.
BagPrediction aggregate_max(const std::vector<double>& patch_scores);

/// Bag score = mean of the min(K, M) largest scores, each contributing
/// weight 1/min(K, M). Ties at the cut break by lowest index. K=1 reduces
/// exactly to aggregate_max.
BagPrediction aggregate_topk(const std::vector<double>& patch_scores, int k);

struct BagLoss {
  double loss = 0.0;
  std::vector<double> patch_grads;  // d loss / d patch score, zero off-support
};

/// Binary cross-entropy on the aggregated score (clipped to
/// [1e-7, 1-1e-7]); the gradient is routed to contributor patches by their
/// weights and is zero everywhere else.
BagLoss bag_loss_and_grads(const BagPrediction& pred, int label);

}  // namespace mcmil
