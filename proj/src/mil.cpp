#include "mcmil/mil.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mcmil {

BagPrediction aggregate_max(const std::vector<double>& patch_scores) {
  if (patch_scores.empty()) throw std::invalid_argument("aggregate_max: empty bag");
  // max_element returns the first maximum, which is the declared tie rule
  const auto it = std::max_element(patch_scores.begin(), patch_scores.end());
  BagPrediction pred;
  pred.score = *it;
  pred.contributors = {{int(it - patch_scores.begin()), 1.0}};
  pred.patch_scores = patch_scores;
  return pred;
}

BagPrediction aggregate_topk(const std::vector<double>& patch_scores, int k) {
  if (patch_scores.empty()) throw std::invalid_argument("aggregate_topk: empty bag");
  if (k < 1) throw std::invalid_argument("aggregate_topk: K must be >= 1");
  const int m = std::min<int>(k, int(patch_scores.size()));

  std::vector<int> order(patch_scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return patch_scores[a] > patch_scores[b]; });

  BagPrediction pred;
  double sum = 0.0;
  const double weight = 1.0 / double(m);
  for (int i = 0; i < m; ++i) {
    sum += patch_scores[std::size_t(order[i])];
    pred.contributors.emplace_back(order[i], weight);
  }
  pred.score = sum / double(m);
  pred.patch_scores = patch_scores;
  return pred;
}

BagLoss bag_loss_and_grads(const BagPrediction& pred, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("bag_loss_and_grads: label not in {0,1}");
  constexpr double kClip = 1e-7;
  const double y = double(label);
  const double p = std::clamp(pred.score, kClip, 1.0 - kClip);

  BagLoss out;
  out.loss = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  const double dscore = (p - y) / (p * (1.0 - p));
  out.patch_grads.assign(pred.patch_scores.size(), 0.0);
  for (const auto& [idx, weight] : pred.contributors) {
    out.patch_grads[std::size_t(idx)] += dscore * weight;
  }
  return out;
}

}  // namespace mcmil
