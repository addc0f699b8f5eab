#pragma once

// Proportional-odds (cumulative logit) model with a single treatment effect:
//
//   P(Y <= j | x) = F(alpha_j - beta x),  x = 0 for group 1, 1 for group 2,
//
// fitted by Newton-Raphson on grouped counts. Cutpoints are parameterized as
// alpha_1 = a_1, alpha_j = alpha_{j-1} + exp(a_j) so they stay strictly
// increasing. The test is the likelihood ratio against the intercept-only
// model, whose MLE is the pooled cumulative proportions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rdgm/stats/tests.hpp"
#include "rdgm/table.hpp"

namespace rdgm::stats {

struct POFit {
  std::vector<double> cutpoints;
  double beta = 0;
  double loglik = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trace;  // one entry per accepted iterate
};

struct POOptions {
  int max_iterations = 50;
  double gradient_tolerance = 1e-8;
  double separation_bound = 30.0;  // |beta| beyond this is treated as divergence
};

namespace detail {

inline double logistic(double u) {
  if (u >= 0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

struct POState {
  double loglik = -HUGE_VAL;
  Eigen::VectorXd grad;  // in (a, beta) space
  Eigen::MatrixXd hess;
};

/// counts[g][j] over J observed categories; params = (a_1..a_{J-1}, beta).
inline POState po_evaluate(const std::vector<std::vector<double>>& counts, const Eigen::VectorXd& params,
                           bool derivatives) {
  const auto J = static_cast<Eigen::Index>(counts[0].size());
  const Eigen::Index m = J - 1;  // cutpoints
  const Eigen::Index P = m + 1;
  std::vector<double> alpha(static_cast<std::size_t>(m));
  alpha[0] = params[0];
  for (Eigen::Index j = 1; j < m; ++j) alpha[static_cast<std::size_t>(j)] = alpha[static_cast<std::size_t>(j - 1)] + std::exp(params[j]);
  const double beta = params[m];

  POState s;
  s.loglik = 0;
  Eigen::VectorXd ga = Eigen::VectorXd::Zero(P);  // gradient wrt (alpha, beta)
  Eigen::MatrixXd ha = Eigen::MatrixXd::Zero(P, P);

  for (int g = 0; g < 2; ++g) {
    const double x = g == 0 ? 0.0 : 1.0;
    for (Eigen::Index j = 0; j < J; ++j) {
      const double n = counts[static_cast<std::size_t>(g)][static_cast<std::size_t>(j)];
      if (n == 0) continue;
      // upper cutpoint index j (if j < m), lower cutpoint j-1 (if j >= 1)
      double Fu = 1, fu = 0, dfu = 0, Fl = 0, fl = 0, dfl = 0;
      if (j < m) {
        Fu = logistic(alpha[static_cast<std::size_t>(j)] - beta * x);
        fu = Fu * (1 - Fu);
        dfu = fu * (1 - 2 * Fu);
      }
      if (j >= 1) {
        Fl = logistic(alpha[static_cast<std::size_t>(j - 1)] - beta * x);
        fl = Fl * (1 - Fl);
        dfl = fl * (1 - 2 * Fl);
      }
      const double p = Fu - Fl;
      if (!(p > 0)) {
        s.loglik = -HUGE_VAL;
        return s;
      }
      s.loglik += n * std::log(p);
      if (!derivatives) continue;

      Eigen::VectorXd dp = Eigen::VectorXd::Zero(P);
      Eigen::MatrixXd d2p = Eigen::MatrixXd::Zero(P, P);
      if (j < m) {
        dp[j] += fu;
        d2p(j, j) += dfu;
        d2p(j, m) += -x * dfu;
        d2p(m, j) += -x * dfu;
      }
      if (j >= 1) {
        dp[j - 1] -= fl;
        d2p(j - 1, j - 1) -= dfl;
        d2p(j - 1, m) += x * dfl;
        d2p(m, j - 1) += x * dfl;
      }
      dp[m] = -x * (fu - fl);
      d2p(m, m) = x * x * (dfu - dfl);
      ga += n * dp / p;
      ha += n * (d2p / p - dp * dp.transpose() / (p * p));
    }
  }
  if (!derivatives) return s;

  // chain rule to (a, beta)
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(P, P);  // T(r, c) = d alpha_r / d a_c
  for (Eigen::Index r = 0; r < m; ++r) {
    T(r, 0) = 1;
    for (Eigen::Index c = 1; c <= r; ++c) T(r, c) = std::exp(params[c]);
  }
  T(m, m) = 1;
  s.grad = T.transpose() * ga;
  s.hess = T.transpose() * ha * T;
  for (Eigen::Index c = 1; c < m; ++c) {
    double tail = 0;
    for (Eigen::Index r = c; r < m; ++r) tail += ga[r];
    s.hess(c, c) += std::exp(params[c]) * tail;
  }
  return s;
}

}  // namespace detail

/// Fits the model to the observed categories of `t` (empty categories are
/// dropped). Throws ValidationError if fewer than two categories are
/// observed or a group is empty.
inline POFit fit_proportional_odds(const TwoByK& t, const POOptions& opt = {}) {
  std::vector<std::vector<double>> counts(2);
  std::vector<double> pooled;
  for (std::size_t k = 0; k < t.categories(); ++k) {
    if (t.column(k) == 0) continue;
    counts[0].push_back(static_cast<double>(t.row1[k]));
    counts[1].push_back(static_cast<double>(t.row2[k]));
    pooled.push_back(static_cast<double>(t.column(k)));
  }
  if (pooled.size() < 2) throw ValidationError("po_logistic: fewer than two observed categories");
  if (t.sum1() == 0 || t.sum2() == 0) throw ValidationError("po_logistic: empty group");

  const auto J = static_cast<Eigen::Index>(pooled.size());
  const Eigen::Index m = J - 1;
  double total = 0;
  for (double c : pooled) total += c;

  // start at the null MLE
  Eigen::VectorXd params = Eigen::VectorXd::Zero(m + 1);
  double cum = 0, prev_alpha = 0;
  for (Eigen::Index j = 0; j < m; ++j) {
    cum += pooled[static_cast<std::size_t>(j)];
    const double q = cum / total;
    const double a = std::log(q / (1 - q));
    params[j] = j == 0 ? a : std::log(a - prev_alpha);
    prev_alpha = a;
  }

  POFit fit;
  auto state = detail::po_evaluate(counts, params, true);
  fit.loglik_trace.push_back(state.loglik);
  for (int it = 0; it < opt.max_iterations; ++it) {
    if (state.grad.cwiseAbs().maxCoeff() < opt.gradient_tolerance) {
      fit.converged = true;
      break;
    }
    fit.iterations = it + 1;
    Eigen::VectorXd step;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-state.hess);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0).all())
      step = ldlt.solve(state.grad);
    else
      step = state.grad / std::max(1.0, state.grad.norm());  // ascent fallback
    double scale = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half, scale *= 0.5) {
      Eigen::VectorXd trial = params + scale * step;
      auto ts = detail::po_evaluate(counts, trial, false);
      if (std::isfinite(ts.loglik) && ts.loglik >= state.loglik - 1e-12 * std::abs(state.loglik)) {
        params = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    state = detail::po_evaluate(counts, params, true);
    fit.loglik_trace.push_back(state.loglik);
    if (std::abs(params[m]) > opt.separation_bound) break;
  }
  if (!fit.converged && state.grad.size() > 0 && state.grad.cwiseAbs().maxCoeff() < opt.gradient_tolerance)
    fit.converged = true;

  fit.beta = params[m];
  fit.loglik = state.loglik;
  double a = params[0];
  fit.cutpoints.push_back(a);
  for (Eigen::Index j = 1; j < m; ++j) {
    a += std::exp(params[j]);
    fit.cutpoints.push_back(a);
  }
  return fit;
}

/// Log-likelihood of the intercept-only model.
inline double po_null_loglik(const TwoByK& t) {
  const double n = static_cast<double>(t.total());
  double ll = 0;
  for (std::size_t k = 0; k < t.categories(); ++k) {
    const double c = static_cast<double>(t.column(k));
    if (c > 0) ll += c * std::log(c / n);
  }
  return ll;
}

inline TestResult po_logistic_test(const TwoByK& t, const POOptions& opt = {}) {
  POFit fit;
  try {
    fit = fit_proportional_odds(t, opt);
  } catch (const ValidationError& e) {
    return TestResult::failure("po-logit", e.what());
  }
  TestResult r;
  r.method = "po-logit";
  r.diagnostics = {{"beta", fit.beta}, {"iterations", static_cast<double>(fit.iterations)}};
  if (!fit.converged || std::abs(fit.beta) > opt.separation_bound || !std::isfinite(fit.loglik)) {
    r.message = std::abs(fit.beta) > opt.separation_bound ? "complete separation" : "no convergence";
    return r;  // p_value absent: failure
  }
  const double lr = std::max(0.0, 2.0 * (fit.loglik - po_null_loglik(t)));
  r.statistic = lr;
  r.p_value = std::min(1.0, std::erfc(std::sqrt(lr / 2.0)));  // chi-square(1) upper tail
  return r;
}

/// Row-level interface: y in 1..K, x in {1, 2}.
inline TestResult po_logistic_test(std::span<const int> y, std::span<const int> x, const POOptions& opt = {}) {
  if (y.size() != x.size()) throw ValidationError("po_logistic_test: y and x differ in length");
  int K = 0;
  for (int v : y) K = std::max(K, v);
  TwoByK t(std::vector<std::int64_t>(static_cast<std::size_t>(K), 0), std::vector<std::int64_t>(static_cast<std::size_t>(K), 0));
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 1) throw ValidationError("po_logistic_test: categories start at 1");
    (x[i] == 1 ? t.row1 : t.row2)[static_cast<std::size_t>(y[i] - 1)]++;
  }
  return po_logistic_test(t, opt);
}

}  // namespace rdgm::stats
