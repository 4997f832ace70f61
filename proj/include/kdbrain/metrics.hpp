#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "kdbrain/errors.hpp"

namespace kdbrain::metrics {

inline double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw DimensionError("accuracy: prediction/label count mismatch");
  if (labels.empty()) throw DomainError("accuracy: empty evaluation set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

// Mann-Whitney AUC with mid-ranks for ties: the probability that a random
// positive outscores a random negative, ties counting one half. nullopt when
// either class is absent.
inline std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("auc: score/label count mismatch");
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Ranks are 1-based; a tie group spanning ranks [lo, hi] shares (lo + hi) / 2.
  // Twice the rank keeps every quantity an exact integer.
  long long twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const auto twice_mid = static_cast<long long>(i + 1 + j + 1);
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]] == 1) twice_rank_sum += twice_mid;
    i = j + 1;
  }
  const auto p = static_cast<long long>(n_pos);
  const long long twice_u = twice_rank_sum - p * (p + 1);
  return (static_cast<double>(twice_u) / 2.0) / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace kdbrain::metrics
