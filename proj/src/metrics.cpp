#include "omib/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace omib {
namespace {

std::size_t count_positives(std::span<const double> scores, std::span<const std::size_t> labels,
                            const char* who) {
  if (scores.size() != labels.size()) {
    throw std::invalid_argument(std::string(who) + ": " + std::to_string(scores.size()) +
                                " scores for " + std::to_string(labels.size()) + " labels");
  }
  std::size_t positives = 0;
  for (std::size_t y : labels) {
    if (y > 1) throw std::invalid_argument(std::string(who) + ": labels must be 0 or 1");
    positives += y;
  }
  if (positives == 0 || positives == labels.size()) {
    throw std::invalid_argument(std::string(who) + ": both classes must be present");
  }
  return positives;
}

}  // namespace

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (predicted.size() != labels.size()) {
    throw std::invalid_argument("accuracy: " + std::to_string(predicted.size()) +
                                " predictions for " + std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double binary_auc(std::span<const double> scores, std::span<const std::size_t> labels) {
  const std::size_t positives = count_positives(scores, labels, "binary_auc");
  const std::size_t negatives = labels.size() - positives;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Midranks over tie groups.
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) positive_rank_sum += midrank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

double f1_at_matched_threshold(std::span<const double> scores, std::span<const std::size_t> labels) {
  const std::size_t positives = count_positives(scores, labels, "f1_at_matched_threshold");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t tp = 0;
  for (std::size_t i = 0; i < positives; ++i) tp += labels[order[i]];
  const double fp = static_cast<double>(positives - tp);
  const double fn = static_cast<double>(positives - tp);
  const double t = static_cast<double>(tp);
  return 2.0 * t / (2.0 * t + fp + fn);
}

}  // namespace omib
