#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "rdgm/error.hpp"
#include "rdgm/stats/tests.hpp"

namespace rdgm::stats {

/// Two-sample logrank test. d = 1 for an event, 0 for censoring; x in {1, 2}.
inline TestResult logrank_test(std::span<const double> y, std::span<const int> d, std::span<const int> x) {
  if (y.size() != d.size() || y.size() != x.size()) throw ValidationError("logrank: input lengths differ");
  const std::size_t n = y.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return y[a] < y[b]; });
  double at_risk = static_cast<double>(n), at_risk1 = 0;
  for (int g : x) at_risk1 += g == 1;
  if (at_risk1 == 0 || at_risk1 == at_risk) throw ValidationError("logrank: both groups must be non-empty");
  double o_minus_e = 0, var = 0, events = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    double dt = 0, d1 = 0, leave = 0, leave1 = 0;
    while (j < n && y[order[j]] == y[order[i]]) {
      const auto k = order[j];
      dt += d[k];
      if (x[k] == 1) {
        d1 += d[k];
        leave1 += 1;
      }
      leave += 1;
      ++j;
    }
    if (dt > 0) {
      const double e1 = dt * at_risk1 / at_risk;
      o_minus_e += d1 - e1;
      if (at_risk > 1)
        var += dt * (at_risk1 / at_risk) * (1 - at_risk1 / at_risk) * (at_risk - dt) / (at_risk - 1);
      events += dt;
    }
    at_risk -= leave;
    at_risk1 -= leave1;
    i = j;
  }
  if (!(var > 0)) return TestResult::failure("logrank", "no informative events");
  TestResult r;
  r.method = "logrank";
  r.statistic = o_minus_e * o_minus_e / var;
  r.p_value = chi_square_upper(r.statistic, 1);
  r.diagnostics = {{"events", events}};
  return r;
}

}  // namespace rdgm::stats
