#pragma once

// Two-arm survival trial with uniform censoring: t ~ event distribution with
// rate eta_g, c ~ Unif(0, u), observed y = min(t, c), d = 1(t <= c).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rdgm/error.hpp"
#include "rdgm/rng.hpp"

namespace rdgm {

enum class EventDist { Exponential, Weibull };

struct SurvivalTwoArmConfig {
  std::int64_t n_obs = 0;
  double eta1 = 1;
  double eta2 = 1;
  double u = 1;
  EventDist event_dist = EventDist::Exponential;
  double weibull_shape = 1;  // S(t) = exp(-(eta t)^shape)

  void validate() const {
    if (n_obs < 2 || n_obs % 2 != 0) throw ValidationError("survival config: n_obs must be even and >= 2");
    if (!(eta1 > 0) || !(eta2 > 0)) throw ValidationError("survival config: event rates must be > 0");
    if (!(u > 0)) throw ValidationError("survival config: censoring bound u must be > 0");
    if (event_dist == EventDist::Weibull && !(weibull_shape > 0))
      throw ValidationError("survival config: Weibull shape must be > 0");
  }
};

struct SurvivalData {
  std::vector<double> y;
  std::vector<int> d;
  std::vector<int> x;
};

/// Event time with rate eta by inversion.
inline double draw_event_time(EventDist dist, double eta, double shape, Rng& rng) {
  const double e = -std::log1p(-uniform01(rng));  // Exp(1)
  if (dist == EventDist::Exponential) return e / eta;
  return std::pow(e, 1.0 / shape) / eta;
}

inline SurvivalData sample_survival(const SurvivalTwoArmConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto half = static_cast<std::size_t>(cfg.n_obs / 2);
  SurvivalData out;
  out.y.reserve(2 * half);
  out.d.reserve(2 * half);
  out.x.reserve(2 * half);
  for (int g = 1; g <= 2; ++g) {
    const double eta = g == 1 ? cfg.eta1 : cfg.eta2;
    for (std::size_t i = 0; i < half; ++i) {
      const double t = draw_event_time(cfg.event_dist, eta, cfg.weibull_shape, rng);
      const double c = cfg.u * uniform01(rng);
      out.y.push_back(std::min(t, c));
      out.d.push_back(t <= c ? 1 : 0);
      out.x.push_back(g);
    }
  }
  return out;
}

/// P(c < t) for exponential events with uniform censoring on (0, u).
inline double expected_censored_fraction(double eta, double u) {
  const double a = eta * u;
  return -std::expm1(-a) / a;
}

}  // namespace rdgm
