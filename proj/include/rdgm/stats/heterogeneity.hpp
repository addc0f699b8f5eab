#pragma once

// Between-study variance estimators for random-effects meta-analysis.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string_view>

#include "rdgm/error.hpp"

namespace rdgm::stats {

enum class Tau2Method { DL, SJ };

namespace detail {

inline void check_meta_input(std::span<const double> y, std::span<const double> v) {
  if (y.size() != v.size()) throw ValidationError("tau2: effects and variances differ in length");
  if (y.size() < 2) throw ValidationError("tau2: at least 2 studies required");
  for (double x : v)
    if (!(x > 0)) throw ValidationError("tau2: variances must be > 0");
}

}  // namespace detail

/// DerSimonian-Laird: max(0, (Q - (k-1)) / C), inverse-variance weights.
inline double tau2_dl(std::span<const double> y, std::span<const double> v) {
  detail::check_meta_input(y, v);
  double sw = 0, sw2 = 0, swy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double w = 1 / v[i];
    sw += w;
    sw2 += w * w;
    swy += w * y[i];
  }
  const double mu = swy / sw;
  double q = 0;
  for (std::size_t i = 0; i < y.size(); ++i) q += (y[i] - mu) * (y[i] - mu) / v[i];
  const double c = sw - sw2 / sw;
  const double df = static_cast<double>(y.size() - 1);
  if (!(c > 0)) return 0.0;
  return std::max(0.0, (q - df) / c);
}

/// Sidik-Jonkman two-step estimator starting from the unweighted variance of
/// the effects.
inline double tau2_sj(std::span<const double> y, std::span<const double> v) {
  detail::check_meta_input(y, v);
  if (std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end()) return 0.0;
  const double k = static_cast<double>(y.size());
  double ybar = 0;
  for (double x : y) ybar += x;
  ybar /= k;
  double t0 = 0;
  for (double x : y) t0 += (x - ybar) * (x - ybar);
  t0 /= k;
  if (t0 == 0) return 0.0;
  double sw = 0, swy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double w = 1 / (v[i] + t0);
    sw += w;
    swy += w * y[i];
  }
  const double mu = swy / sw;
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - mu) * (y[i] - mu) / (v[i] + t0);
  return t0 * s / (k - 1);
}

inline double tau2_estimate(std::span<const double> y, std::span<const double> v, Tau2Method m) {
  return m == Tau2Method::DL ? tau2_dl(y, v) : tau2_sj(y, v);
}

}  // namespace rdgm::stats
