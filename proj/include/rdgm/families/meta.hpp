#pragma once

// Two-level meta-analysis generator. Study effects theta_i ~ N(theta, tau2);
// each study's outcomes are simulated and summarized by Hedges' g.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rdgm/error.hpp"
#include "rdgm/rng.hpp"

namespace rdgm {

struct MetaAnalysisConfig {
  std::size_t n_study = 0;
  double theta = 0;
  double tau2 = 0;
  double u_min = 4;
  double u_max = 4;
  std::vector<double> mu1;  // group-1 mean per study
  double sigma2 = 1;

  void validate() const {
    if (n_study < 1) throw ValidationError("meta config: n_study must be >= 1");
    if (!(tau2 >= 0)) throw ValidationError("meta config: tau2 must be >= 0");
    if (u_min < 4) throw ValidationError("meta config: u_min must be >= 4");
    if (u_min > u_max) throw ValidationError("meta config: u_min > u_max");
    if (mu1.size() != n_study) throw ValidationError("meta config: mu1 length must equal n_study");
    if (!(sigma2 > 0)) throw ValidationError("meta config: sigma2 must be > 0");
  }
};

struct HedgesG {
  double g = 0;
  double variance = 0;
};

/// Small-sample correction J(m) = 1 - 3 / (4m - 1).
inline double hedges_correction(double m) { return 1.0 - 3.0 / (4.0 * m - 1.0); }

/// Standardized difference (group 2 minus group 1) with Hedges' correction.
/// Variance is J^2 * ((n1+n2)/(n1 n2) + d^2 / (2 (n1+n2-2))).
inline HedgesG hedges_g(double mean1, double mean2, double var1, double var2, std::int64_t n1, std::int64_t n2) {
  if (n1 < 2 || n2 < 2) throw ValidationError("hedges_g: need at least 2 observations per group");
  const double m = static_cast<double>(n1 + n2 - 2);
  const double pooled = ((n1 - 1) * var1 + (n2 - 1) * var2) / m;
  if (!(pooled > 0)) throw RuntimeFailure("hedges_g: zero pooled variance");
  const double d = (mean2 - mean1) / std::sqrt(pooled);
  const double j = hedges_correction(m);
  const double nn1 = static_cast<double>(n1), nn2 = static_cast<double>(n2);
  return {j * d, j * j * ((nn1 + nn2) / (nn1 * nn2) + d * d / (2.0 * m))};
}

/// Study size drawn from Unif(u_min, u_max), rounded to the nearest even
/// integer and at least 4.
inline std::int64_t draw_study_size(double u_min, double u_max, Rng& rng) {
  const double raw = u_min + (u_max - u_min) * uniform01(rng);
  auto n = static_cast<std::int64_t>(2 * std::llround(raw / 2));
  return n < 4 ? 4 : n;
}

struct MetaData {
  std::vector<double> g;
  std::vector<double> variance;
};

inline MetaData sample_meta(const MetaAnalysisConfig& cfg, Rng& rng) {
  cfg.validate();
  MetaData out;
  out.g.reserve(cfg.n_study);
  out.variance.reserve(cfg.n_study);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  const double sigma = std::sqrt(cfg.sigma2);
  for (std::size_t i = 0; i < cfg.n_study; ++i) {
    const double theta_i = cfg.theta + std::sqrt(cfg.tau2) * std_normal(rng);
    const auto n = draw_study_size(cfg.u_min, cfg.u_max, rng);
    const auto half = n / 2;
    double stats[2][2];  // per group: mean, sample variance (Welford)
    for (int g = 0; g < 2; ++g) {
      const double mu = cfg.mu1[i] + (g == 1 ? theta_i : 0.0);
      double mean = 0, m2 = 0;
      for (std::int64_t k = 0; k < half; ++k) {
        const double v = mu + sigma * std_normal(rng);
        const double delta = v - mean;
        mean += delta / static_cast<double>(k + 1);
        m2 += delta * (v - mean);
      }
      stats[g][0] = mean;
      stats[g][1] = m2 / static_cast<double>(half - 1);
    }
    auto h = hedges_g(stats[0][0], stats[1][0], stats[0][1], stats[1][1], half, half);
    out.g.push_back(h.g);
    out.variance.push_back(h.variance);
  }
  return out;
}

}  // namespace rdgm
