#pragma once

// Two-sample tests on ordinal outcomes: Pearson chi-square, Monte Carlo
// conditional Fisher test, and the Wilcoxon rank-sum test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "rdgm/error.hpp"
#include "rdgm/rng.hpp"
#include "rdgm/table.hpp"

namespace rdgm::stats {

struct TestResult {
  std::string method;
  std::optional<double> p_value;  // absent iff failed
  double statistic = 0;
  std::map<std::string, double> diagnostics;
  std::string message;

  [[nodiscard]] bool failed() const { return !p_value.has_value(); }

  static TestResult failure(std::string method, std::string why) {
    TestResult r;
    r.method = std::move(method);
    r.message = std::move(why);
    return r;
  }
};

inline double normal_upper(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// Upper tail of chi-square(df).
inline double chi_square_upper(double x, double df) {
  if (x <= 0) return 1.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

// ---------------------------------------------------------------------------
// Chi-square

/// Pearson test without continuity correction. All-zero columns are dropped
/// and counted in diagnostics["dropped_columns"].
inline TestResult chi_square_test(const TwoByK& t) {
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < t.categories(); ++k)
    if (t.column(k) > 0) keep.push_back(k);
  const double dropped = static_cast<double>(t.categories() - keep.size());
  if (keep.size() < 2) {
    auto r = TestResult::failure("chisq", "degenerate table: fewer than two non-empty columns");
    r.diagnostics["dropped_columns"] = dropped;
    return r;
  }
  const double r1 = static_cast<double>(t.sum1());
  const double r2 = static_cast<double>(t.sum2());
  if (r1 <= 0 || r2 <= 0) return TestResult::failure("chisq", "degenerate table: empty group");
  const double n = r1 + r2;

  // X^2 = N * (sum O^2 / (r_i c_j) - 1)
  double s = 0, min_expected = HUGE_VAL;
  int small = 0;
  for (auto k : keep) {
    const double c = static_cast<double>(t.column(k));
    const double o1 = static_cast<double>(t.row1[k]), o2 = static_cast<double>(t.row2[k]);
    s += o1 * o1 / (r1 * c) + o2 * o2 / (r2 * c);
    for (double e : {r1 * c / n, r2 * c / n}) {
      min_expected = std::min(min_expected, e);
      if (e < 5) ++small;
    }
  }
  const double stat = std::max(0.0, n * (s - 1.0));
  const double df = static_cast<double>(keep.size() - 1);

  TestResult r;
  r.method = "chisq";
  r.statistic = stat;
  r.p_value = chi_square_upper(stat, df);
  r.diagnostics = {{"df", df}, {"dropped_columns", dropped}, {"min_expected", min_expected},
                   {"cells_expected_lt5", static_cast<double>(small)}};
  return r;
}

// ---------------------------------------------------------------------------
// Fisher, Monte Carlo conditional on margins

namespace detail {

/// log(k!) for k = 0..n.
inline std::vector<double> log_factorials(std::size_t n) {
  std::vector<double> lf(n + 1, 0.0);
  for (std::size_t k = 2; k <= n; ++k) lf[k] = lf[k - 1] + std::log(static_cast<double>(k));
  return lf;
}

/// Hypergeometric draw: `draws` items from a population of `total` with
/// `succ` successes. Inversion searching outward from the mode.
inline std::int64_t hypergeometric(std::int64_t total, std::int64_t succ, std::int64_t draws,
                                   const std::vector<double>& lf, Rng& rng) {
  const std::int64_t fail = total - succ;
  const std::int64_t lo = std::max<std::int64_t>(0, draws - fail);
  const std::int64_t hi = std::min(draws, succ);
  if (lo == hi) return lo;
  std::int64_t mode = ((draws + 1) * (succ + 1)) / (total + 2);
  mode = std::clamp(mode, lo, hi);
  auto idx = [](std::int64_t v) { return static_cast<std::size_t>(v); };
  const double pmode = std::exp(lf[idx(succ)] - lf[idx(mode)] - lf[idx(succ - mode)] + lf[idx(fail)] -
                                lf[idx(draws - mode)] - lf[idx(fail - draws + mode)] - lf[idx(total)] +
                                lf[idx(draws)] + lf[idx(total - draws)]);
  double u = uniform01(rng) - pmode;
  if (u < 0) return mode;
  std::int64_t up = mode, down = mode;
  double pup = pmode, pdown = pmode;
  while (up < hi || down > lo) {
    if (up < hi) {
      const double x = static_cast<double>(up);
      pup *= (static_cast<double>(succ) - x) * (static_cast<double>(draws) - x) /
             ((x + 1) * (static_cast<double>(fail - draws) + x + 1));
      ++up;
      u -= pup;
      if (u < 0) return up;
    }
    if (down > lo) {
      const double x = static_cast<double>(down);
      pdown *= x * (static_cast<double>(fail - draws) + x) /
               ((static_cast<double>(succ) - x + 1) * (static_cast<double>(draws) - x + 1));
      --down;
      u -= pdown;
      if (u < 0) return down;
    }
  }
  return mode;  // rounding residue
}

}  // namespace detail

/// p = (1 + #{simulated tables with probability <= observed}) / (B + 1).
/// Simulated tables have the observed margins; drawing group-1 counts column
/// by column from the multivariate hypergeometric is the same distribution as
/// permuting group labels over the pooled outcomes.
inline TestResult fisher_exact_mc(const TwoByK& t, std::int64_t B, std::uint64_t seed) {
  if (B < 1) throw ValidationError("fisher_exact_mc: B must be >= 1");
  std::vector<std::int64_t> cols, obs;
  for (std::size_t k = 0; k < t.categories(); ++k)
    if (t.column(k) > 0) {
      cols.push_back(t.column(k));
      obs.push_back(t.row1[k]);
    }
  const std::int64_t n1 = t.sum1();
  const std::int64_t n = t.total();
  TestResult r;
  r.method = "fisher-mc";
  r.diagnostics["B"] = static_cast<double>(B);
  r.diagnostics["dropped_columns"] = static_cast<double>(t.categories() - cols.size());
  if (n == 0) return TestResult::failure("fisher-mc", "empty table");

  const auto lf = detail::log_factorials(static_cast<std::size_t>(n));
  auto score = [&](const std::vector<std::int64_t>& x) {  // log P(table) up to a constant
    double s = 0;
    for (std::size_t k = 0; k < cols.size(); ++k)
      s -= lf[static_cast<std::size_t>(x[k])] + lf[static_cast<std::size_t>(cols[k] - x[k])];
    return s;
  };
  const double observed = score(obs);
  const double tol = 1e-7 * std::max(1.0, std::abs(observed));

  auto rng = make_rng(seed, 0x666973686572ULL);
  std::vector<std::int64_t> x(cols.size());
  std::int64_t hits = 0;
  for (std::int64_t b = 0; b < B; ++b) {
    std::int64_t remaining = n, need = n1;
    for (std::size_t k = 0; k + 1 < cols.size(); ++k) {
      x[k] = detail::hypergeometric(remaining, cols[k], need, lf, rng);
      remaining -= cols[k];
      need -= x[k];
    }
    if (!cols.empty()) x.back() = need;
    if (score(x) <= observed + tol) ++hits;
  }
  r.statistic = observed;
  r.p_value = static_cast<double>(1 + hits) / static_cast<double>(B + 1);
  return r;
}

// ---------------------------------------------------------------------------
// Wilcoxon rank-sum

namespace detail {

/// Normal approximation given group-1 rank sum and the tie term sum(t^3 - t).
inline TestResult wilcoxon_from_ranks(double rank_sum1, double n1, double n2, double ties) {
  const double n = n1 + n2;
  const double u = rank_sum1 - n1 * (n1 + 1) / 2;
  const double var = n1 * n2 / 12.0 * ((n + 1) - ties / (n * (n - 1)));
  if (!(var > 0)) return TestResult::failure("wilcoxon", "all values tied");
  double z = u - n1 * n2 / 2;
  const double correction = z > 0 ? 0.5 : (z < 0 ? -0.5 : 0.0);
  z = (z - correction) / std::sqrt(var);
  TestResult r;
  r.method = "wilcoxon";
  r.statistic = z;
  r.p_value = std::min(1.0, 2.0 * normal_upper(std::abs(z)));
  r.diagnostics = {{"W", rank_sum1}, {"U", u}};
  return r;
}

}  // namespace detail

/// Two-sided, midranks, tie-corrected variance, continuity correction 0.5.
inline TestResult wilcoxon_rank_sum(std::span<const double> y1, std::span<const double> y2) {
  if (y1.empty() || y2.empty()) throw ValidationError("wilcoxon_rank_sum: empty group");
  const std::size_t n = y1.size() + y2.size();
  std::vector<std::pair<double, int>> pooled;
  pooled.reserve(n);
  for (double v : y1) pooled.emplace_back(v, 1);
  for (double v : y2) pooled.emplace_back(v, 2);
  std::sort(pooled.begin(), pooled.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum1 = 0, ties = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && pooled[j].first == pooled[i].first) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2;
    const double t = static_cast<double>(j - i);
    ties += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (pooled[k].second == 1) rank_sum1 += mid;
    i = j;
  }
  return detail::wilcoxon_from_ranks(rank_sum1, static_cast<double>(y1.size()), static_cast<double>(y2.size()),
                                     ties);
}

/// Same test on a 2xK table of ordered categories.
inline TestResult wilcoxon_rank_sum(const TwoByK& t) {
  const double n1 = static_cast<double>(t.sum1()), n2 = static_cast<double>(t.sum2());
  if (n1 == 0 || n2 == 0) throw ValidationError("wilcoxon_rank_sum: empty group");
  double below = 0, rank_sum1 = 0, ties = 0;
  for (std::size_t k = 0; k < t.categories(); ++k) {
    const double c = static_cast<double>(t.column(k));
    if (c == 0) continue;
    const double mid = below + (c + 1) / 2;
    rank_sum1 += mid * static_cast<double>(t.row1[k]);
    ties += c * c * c - c;
    below += c;
  }
  return detail::wilcoxon_from_ranks(rank_sum1, n1, n2, ties);
}

}  // namespace rdgm::stats
