#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "rdgm/error.hpp"

namespace rdgm::stats {

/// Midrank Mann-Whitney AUC: P(score_pos > score_neg) + P(equal)/2.
inline double auc_score(std::span<const double> scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw ValidationError("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double pos = 0, rank_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]]) {
        rank_pos += mid;
        pos += 1;
      }
    i = j;
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) throw ValidationError("auc: both label classes must be present");
  return (rank_pos - pos * (pos + 1) / 2) / (pos * neg);
}

inline double auc_score(std::span<const double> scores, std::span<const bool> labels) {
  return auc_score(scores, std::vector<bool>(labels.begin(), labels.end()));
}

struct PowerEstimate {
  double power = 0;
  double mcse = 0;
  std::size_t n_used = 0;
  std::size_t n_failed = 0;

  [[nodiscard]] double failure_rate() const {
    const auto total = n_used + n_failed;
    return total == 0 ? 0.0 : static_cast<double>(n_failed) / static_cast<double>(total);
  }
};

inline double proportion_mcse(double p, std::size_t n) {
  return std::sqrt(p * (1 - p) / static_cast<double>(n));
}

/// Failed repetitions (nullopt) are excluded from the denominator.
inline PowerEstimate power_and_mcse(std::span<const std::optional<double>> p_values, double alpha) {
  if (p_values.empty()) throw ValidationError("power: empty p-value list");
  PowerEstimate e;
  std::size_t reject = 0;
  for (const auto& p : p_values) {
    if (!p) {
      ++e.n_failed;
      continue;
    }
    ++e.n_used;
    if (*p <= alpha) ++reject;
  }
  if (e.n_used == 0) throw RuntimeFailure("power: all repetitions failed");
  e.power = static_cast<double>(reject) / static_cast<double>(e.n_used);
  e.mcse = proportion_mcse(e.power, e.n_used);
  return e;
}

inline PowerEstimate power_and_mcse(std::span<const double> p_values, double alpha) {
  std::vector<std::optional<double>> v(p_values.begin(), p_values.end());
  return power_and_mcse(std::span<const std::optional<double>>(v), alpha);
}

}  // namespace rdgm::stats
