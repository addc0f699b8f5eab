#pragma once

// Two-arm trial with an ordinal outcome: each of n/2 individuals per group
// draws its category from Multinomial(1, pi_g).

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "rdgm/error.hpp"
#include "rdgm/rng.hpp"
#include "rdgm/table.hpp"

namespace rdgm {

/// Published probabilities are rounded; tuples within this distance of 1 are
/// rescaled, anything further off is rejected.
inline constexpr double kProbabilitySumTolerance = 0.03;

inline std::vector<double> normalize_probabilities(std::vector<double> p, const std::string& what = "probabilities") {
  if (p.size() < 2) throw ValidationError(what + ": need at least 2 categories");
  double s = 0;
  for (double v : p) {
    if (!(v >= 0) || !std::isfinite(v)) throw ValidationError(what + ": entries must be finite and >= 0");
    s += v;
  }
  if (std::abs(s - 1.0) > kProbabilitySumTolerance)
    throw ValidationError(what + ": sum " + std::to_string(s) + " is not within 0.03 of 1");
  for (double& v : p) v /= s;
  return p;
}

struct OrdinalTwoArmConfig {
  std::int64_t n_obs = 0;
  std::size_t K = 0;
  std::vector<double> pi1;
  std::vector<double> pi2;

  /// Checks invariants and renormalizes the probability tuples.
  static OrdinalTwoArmConfig make(std::int64_t n_obs, std::vector<double> pi1, std::vector<double> pi2) {
    if (n_obs < 2 || n_obs % 2 != 0)
      throw ValidationError("ordinal config: n_obs must be even and >= 2 (got " + std::to_string(n_obs) + ")");
    if (pi1.size() != pi2.size()) throw ValidationError("ordinal config: pi1 and pi2 differ in length");
    OrdinalTwoArmConfig c;
    c.n_obs = n_obs;
    c.K = pi1.size();
    c.pi1 = normalize_probabilities(std::move(pi1), "pi1");
    c.pi2 = normalize_probabilities(std::move(pi2), "pi2");
    return c;
  }
};

/// n_obs rows of (y in 1..K, x in {1,2}); group 1 rows come first.
struct OrdinalData {
  std::vector<int> y;
  std::vector<int> x;
  std::size_t K = 0;

  [[nodiscard]] TwoByK table() const {
    TwoByK t(std::vector<std::int64_t>(K, 0), std::vector<std::int64_t>(K, 0));
    for (std::size_t i = 0; i < y.size(); ++i) (x[i] == 1 ? t.row1 : t.row2)[static_cast<std::size_t>(y[i] - 1)]++;
    return t;
  }
};

namespace detail {

inline int draw_category(const std::vector<double>& cdf, Rng& rng) {
  const double u = uniform01(rng);
  for (std::size_t k = 0; k + 1 < cdf.size(); ++k)
    if (u < cdf[k]) return static_cast<int>(k) + 1;
  return static_cast<int>(cdf.size());
}

inline std::vector<double> cumulative(const std::vector<double>& p) {
  std::vector<double> c(p.size());
  std::partial_sum(p.begin(), p.end(), c.begin());
  return c;
}

}  // namespace detail

inline OrdinalData sample_ordinal(const OrdinalTwoArmConfig& cfg, Rng& rng) {
  if (cfg.n_obs % 2 != 0) throw ValidationError("sample_ordinal: odd n_obs");
  const auto half = static_cast<std::size_t>(cfg.n_obs / 2);
  OrdinalData d;
  d.K = cfg.K;
  d.y.reserve(2 * half);
  d.x.reserve(2 * half);
  const auto c1 = detail::cumulative(cfg.pi1);
  const auto c2 = detail::cumulative(cfg.pi2);
  for (std::size_t i = 0; i < half; ++i) {
    d.y.push_back(detail::draw_category(c1, rng));
    d.x.push_back(1);
  }
  for (std::size_t i = 0; i < half; ++i) {
    d.y.push_back(detail::draw_category(c2, rng));
    d.x.push_back(2);
  }
  return d;
}

/// Maximum-likelihood category proportions per group.
inline std::pair<std::vector<double>, std::vector<double>> estimate_ordinal_probs(const TwoByK& counts) {
  auto row = [](const std::vector<std::int64_t>& r, const char* g) {
    double s = 0;
    for (auto v : r) {
      if (v < 0) throw ValidationError("estimate_ordinal_probs: negative count");
      s += static_cast<double>(v);
    }
    if (s <= 0) throw ValidationError(std::string("estimate_ordinal_probs: zero row sum in group ") + g);
    std::vector<double> p;
    p.reserve(r.size());
    for (auto v : r) p.push_back(static_cast<double>(v) / s);
    return p;
  };
  return {row(counts.row1, "1"), row(counts.row2, "2")};
}

struct RelativeEffect {
  double p = 0.5;          // P(Y1 > Y2) + 0.5 P(Y1 = Y2)
  double deviation = 0.0;  // |p - 0.5|
};

/// p = 0.5 + (P(Y1 > Y2) - P(Y1 < Y2)) / 2. The two sums are computed the same
/// way, so identical tuples give exactly 0.5. Tuples are taken relative to
/// their sums, as the sampler does with rounded published proportions.
inline RelativeEffect relative_effect(const std::vector<double>& pi1, const std::vector<double>& pi2) {
  if (pi1.size() != pi2.size()) throw ValidationError("relative_effect: probability tuples differ in length");
  double below1 = 0, below2 = 0, greater = 0, less = 0;
  for (std::size_t k = 0; k < pi1.size(); ++k) {
    greater += pi1[k] * below2;
    less += pi2[k] * below1;
    below1 += pi1[k];
    below2 += pi2[k];
  }
  if (!(below1 > 0) || !(below2 > 0)) throw ValidationError("relative_effect: probabilities sum to zero");
  const double p = 0.5 + 0.5 * (greater - less) / (below1 * below2);
  return {p, std::abs(p - 0.5)};
}

}  // namespace rdgm
