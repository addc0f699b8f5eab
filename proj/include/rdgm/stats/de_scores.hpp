#pragma once

// Per-gene evidence scores for two-group count data. Larger means more
// evidence of differential expression.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rdgm/error.hpp"
#include "rdgm/families/de.hpp"
#include "rdgm/stats/tests.hpp"

namespace rdgm::stats {

enum class DEScoreMethod { LogT, RankSum };

struct GeneScores {
  std::vector<double> score;
  std::size_t zero_variance_genes = 0;
};

/// |pooled two-sample t| on log2(count + 1).
inline double log_t_score(std::span<const std::int64_t> counts, std::span<const int> group, bool* zero_var = nullptr) {
  double s1 = 0, s2 = 0, q1 = 0, q2 = 0, n1 = 0, n2 = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double v = std::log2(static_cast<double>(counts[i]) + 1);
    if (group[i] == 1) {
      s1 += v;
      q1 += v * v;
      n1 += 1;
    } else {
      s2 += v;
      q2 += v * v;
      n2 += 1;
    }
  }
  const double m1 = s1 / n1, m2 = s2 / n2;
  const double ss = std::max(0.0, q1 - n1 * m1 * m1) + std::max(0.0, q2 - n2 * m2 * m2);
  const double sp2 = ss / (n1 + n2 - 2);
  const double se = std::sqrt(sp2 * (1 / n1 + 1 / n2));
  if (!(se > 1e-12)) {
    if (zero_var) *zero_var = true;
    return 0.0;
  }
  return std::abs(m1 - m2) / se;
}

inline double rank_sum_score(std::span<const std::int64_t> counts, std::span<const int> group) {
  std::vector<double> a, b;
  for (std::size_t i = 0; i < counts.size(); ++i) (group[i] == 1 ? a : b).push_back(static_cast<double>(counts[i]));
  auto r = wilcoxon_rank_sum(a, b);
  return r.failed() ? 0.0 : std::abs(r.statistic);
}

inline GeneScores de_gene_scores(const CountMatrix& m, DEScoreMethod method) {
  std::size_t n1 = 0;
  for (int g : m.group) n1 += g == 1;
  if (n1 == 0 || n1 == m.n_samples) throw ValidationError("de_gene_scores: both groups must be non-empty");
  if (method == DEScoreMethod::LogT && m.n_samples < 3)
    throw ValidationError("de_gene_scores: log-t needs at least 3 samples");
  GeneScores out;
  out.score.resize(m.n_genes);
  for (std::size_t g = 0; g < m.n_genes; ++g) {
    std::span<const std::int64_t> row(m.gene(g), m.n_samples);
    if (method == DEScoreMethod::LogT) {
      bool zv = false;
      out.score[g] = log_t_score(row, m.group, &zv);
      out.zero_variance_genes += zv;
    } else {
      out.score[g] = rank_sum_score(row, m.group);
    }
  }
  return out;
}

}  // namespace rdgm::stats
