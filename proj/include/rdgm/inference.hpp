#pragma once

// Parameter inference from selected datasets: direct (one value per dataset)
// and aggregated (values generated from dataset summaries), mapping into
// considered parameter vectors, model-structure choice and plausibility
// checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rdgm/core.hpp"
#include "rdgm/error.hpp"
#include "rdgm/families/ordinal.hpp"
#include "rdgm/rng.hpp"
#include "rdgm/selection.hpp"

namespace rdgm {

enum class InferenceMode { Direct, Aggregated };

inline std::string_view to_string(InferenceMode m) { return m == InferenceMode::Direct ? "direct" : "aggregated"; }

struct InferredValueSet {
  std::string parameter;
  std::vector<ParamValue> values;
  InferenceMode mode = InferenceMode::Direct;
  std::vector<std::string> dataset_ids;  // direct: index-aligned with values
  std::string strategy;                  // aggregated only
  std::optional<std::uint64_t> seed;
  std::vector<std::string> warnings;

  [[nodiscard]] std::size_t A() const { return mode == InferenceMode::Aggregated ? values.size() : 0; }

  void validate() const {
    if (mode == InferenceMode::Direct && dataset_ids.size() != values.size())
      throw ValidationError("value set '" + parameter + "': direct mode needs one dataset id per value");
  }
};

// ---------------------------------------------------------------------------
// direct_infer

enum class EstimatorKind { Read, Sum, OrdinalProportions, TableReference };

/// How one parameter is obtained from a record.
///  Read               number(keys[0])
///  Sum                sum of number(k) over keys
///  OrdinalProportions counts table keys[0] if present, otherwise columns
///                     `<prefix>1`, `<prefix>2`, ... ; renormalized
///  TableReference     text(keys[0]) as a path, resolved against base_dir
struct EstimatorBinding {
  std::string parameter;
  EstimatorKind kind = EstimatorKind::Read;
  std::vector<std::string> keys;
  std::string prefix;
  std::string base_dir;
};

inline EstimatorKind estimator_kind_from_string(std::string_view s) {
  if (s == "read") return EstimatorKind::Read;
  if (s == "sum") return EstimatorKind::Sum;
  if (s == "ordinal-proportions") return EstimatorKind::OrdinalProportions;
  if (s == "expression-table" || s == "table-reference") return EstimatorKind::TableReference;
  throw ValidationError("unknown estimator '" + std::string(s) + "'");
}

namespace detail {

inline std::vector<double> proportions_from_record(const DatasetRecord& r, const EstimatorBinding& b) {
  if (!b.keys.empty())
    if (const auto* v = r.get(b.keys.front()); v && std::holds_alternative<CountTable>(*v)) {
      const auto& t = std::get<CountTable>(*v);
      double n = 0;
      for (const auto& [_, c] : t) n += c;
      if (!(n > 0)) throw ValidationError("count table '" + b.keys.front() + "' is empty");
      std::vector<double> p;
      for (const auto& [_, c] : t) p.push_back(c / n);
      return p;
    }
  if (b.prefix.empty()) throw ValidationError("ordinal-proportions needs a counts key or a column prefix");
  std::vector<double> p;
  for (int k = 1; r.get(b.prefix + std::to_string(k)); ++k) p.push_back(r.number(b.prefix + std::to_string(k)));
  if (p.size() < 2) throw ValidationError("fewer than two '" + b.prefix + "*' columns");
  return normalize_probabilities(std::move(p), b.parameter);
}

inline ParamValue estimate(const DatasetRecord& r, const EstimatorBinding& b) {
  switch (b.kind) {
    case EstimatorKind::Read:
      if (b.keys.size() != 1) throw ValidationError("read estimator for '" + b.parameter + "' needs one key");
      return r.number(b.keys.front());
    case EstimatorKind::Sum: {
      if (b.keys.empty()) throw ValidationError("sum estimator for '" + b.parameter + "' needs keys");
      double s = 0;
      for (const auto& k : b.keys) s += r.number(k);
      return s;
    }
    case EstimatorKind::OrdinalProportions: return proportions_from_record(r, b);
    case EstimatorKind::TableReference: {
      if (b.keys.size() != 1) throw ValidationError("table estimator for '" + b.parameter + "' needs one key");
      std::filesystem::path p = r.text(b.keys.front());
      if (p.is_relative() && !b.base_dir.empty()) p = std::filesystem::path(b.base_dir) / p;
      return p.lexically_normal().string();
    }
  }
  throw ValidationError("unhandled estimator");
}

}  // namespace detail

/// One direct-mode value set per binding, index-aligned with `datasets`.
inline std::vector<InferredValueSet> direct_infer(std::span<const DatasetRecord> datasets,
                                                  std::span<const EstimatorBinding> estimators) {
  if (datasets.empty()) throw ValidationError("direct_infer: no datasets");
  std::vector<InferredValueSet> out;
  for (const auto& b : estimators) {
    InferredValueSet s;
    s.parameter = b.parameter;
    s.mode = InferenceMode::Direct;
    for (const auto& r : datasets) {
      try {
        s.values.push_back(detail::estimate(r, b));
      } catch (const ValidationError& e) {
        throw ValidationError("estimator for '" + b.parameter + "' failed on dataset '" + r.id + "': " + e.what());
      }
      s.dataset_ids.push_back(r.id);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// aggregate_infer

enum class AggregateKind { RangeEquidistant, RangeUniformSample, FitNormalSample };

struct AggregateStrategy {
  AggregateKind kind = AggregateKind::RangeEquidistant;
  std::size_t A = 1;
  std::uint64_t seed = 0;

  [[nodiscard]] std::string descriptor() const {
    switch (kind) {
      case AggregateKind::RangeEquidistant: return "range-equidistant(" + std::to_string(A) + ")";
      case AggregateKind::RangeUniformSample:
        return "range-uniform-sample(" + std::to_string(A) + ", seed " + std::to_string(seed) + ")";
      case AggregateKind::FitNormalSample:
        return "fit-normal-sample(" + std::to_string(A) + ", seed " + std::to_string(seed) + ")";
    }
    return "?";
  }
};

inline AggregateKind aggregate_kind_from_string(std::string_view s) {
  if (s == "range-equidistant") return AggregateKind::RangeEquidistant;
  if (s == "range-uniform-sample") return AggregateKind::RangeUniformSample;
  if (s == "fit-normal-sample") return AggregateKind::FitNormalSample;
  throw ValidationError("unknown aggregation strategy '" + std::string(s) + "'");
}

/// Values from min to max inclusive; A = 1 gives the midpoint.
inline std::vector<double> equidistant(double lo, double hi, std::size_t A) {
  if (A == 1) return {lo + (hi - lo) / 2};
  std::vector<double> v(A);
  const double step = (hi - lo) / static_cast<double>(A - 1);
  for (std::size_t i = 0; i < A; ++i) v[i] = lo + step * static_cast<double>(i);
  v.front() = lo;
  v.back() = hi;
  return v;
}

inline InferredValueSet aggregate_infer(std::span<const InferredValueSet> base, const AggregateStrategy& strategy) {
  if (base.empty()) throw ValidationError("aggregate_infer: no base value sets");
  if (strategy.A < 1) throw ValidationError("aggregate_infer: A must be >= 1");
  std::vector<double> x;
  for (const auto& s : base)
    for (const auto& v : s.values) {
      const auto* d = std::get_if<double>(&v);
      if (!d) throw ValidationError("aggregate_infer: '" + s.parameter + "' is not scalar; tuples cannot be aggregated");
      x.push_back(*d);
    }
  if (x.empty()) throw ValidationError("aggregate_infer: base value set is empty");

  InferredValueSet out;
  out.parameter = base.front().parameter;
  out.mode = InferenceMode::Aggregated;
  out.strategy = strategy.descriptor();
  if (strategy.kind != AggregateKind::RangeEquidistant) out.seed = strategy.seed;

  const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<double> v;
  if (lo == hi) {
    v.assign(strategy.A, lo);
    out.warnings.push_back("degenerate range for '" + out.parameter + "': constant value set");
  } else if (strategy.kind == AggregateKind::RangeEquidistant) {
    v = equidistant(lo, hi, strategy.A);
  } else {
    auto rng = make_rng(strategy.seed, 0x616767ULL);
    if (strategy.kind == AggregateKind::RangeUniformSample) {
      for (std::size_t i = 0; i < strategy.A; ++i) v.push_back(std::min(hi, lo + (hi - lo) * uniform01(rng)));
    } else {
      const double n = static_cast<double>(x.size());
      const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
      double ss = 0;
      for (double y : x) ss += (y - mean) * (y - mean);
      const double sd = x.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
      std::normal_distribution<double> norm(mean, sd);
      for (std::size_t i = 0; i < strategy.A; ++i) v.push_back(norm(rng));
    }
  }
  out.values.assign(v.begin(), v.end());
  return out;
}

// ---------------------------------------------------------------------------
// map_to_considered_vectors

enum class MappingDesign { OneToOne, FullFactorial, PartialFactorial };

inline std::string_view to_string(MappingDesign d) {
  switch (d) {
    case MappingDesign::OneToOne: return "one-to-one";
    case MappingDesign::FullFactorial: return "full-factorial";
    case MappingDesign::PartialFactorial: return "partial-factorial";
  }
  return "?";
}

inline MappingDesign mapping_design_from_string(std::string_view s) {
  for (auto d : {MappingDesign::OneToOne, MappingDesign::FullFactorial, MappingDesign::PartialFactorial})
    if (to_string(d) == s) return d;
  throw ValidationError("unknown mapping design '" + std::string(s) + "'");
}

struct ConsideredParameterSet {
  std::vector<ParameterVector> vectors;
  MappingDesign design = MappingDesign::OneToOne;
  std::vector<std::size_t> multiplicity;

  [[nodiscard]] std::size_t size() const { return vectors.size(); }
};

namespace detail {

inline std::string value_source(const InferredValueSet& s, std::size_t i) {
  return s.mode == InferenceMode::Direct ? s.dataset_ids[i] : s.parameter + "[" + std::to_string(i + 1) + "]";
}

/// Builds the vector for one index combination. The provenance is the
/// dataset id when every value comes from the same dataset.
inline ParameterVector combine(std::span<const InferredValueSet> sets, std::span<const std::size_t> idx) {
  std::vector<ParameterVector::Entry> e;
  std::vector<std::string> sources;
  bool all_direct = true;
  for (std::size_t q = 0; q < sets.size(); ++q) {
    e.emplace_back(sets[q].parameter, sets[q].values[idx[q]]);
    auto src = value_source(sets[q], idx[q]);
    if (std::find(sources.begin(), sources.end(), src) == sources.end()) sources.push_back(std::move(src));
    all_direct = all_direct && sets[q].mode == InferenceMode::Direct;
  }
  Provenance p;
  if (all_direct && sources.size() == 1) {
    p = {ProvenanceKind::Dataset, sources.front()};
  } else {
    p.kind = all_direct ? ProvenanceKind::Dataset : ProvenanceKind::Aggregated;
    for (std::size_t i = 0; i < sources.size(); ++i) p.source += (i ? "+" : "") + sources[i];
  }
  return ParameterVector(std::move(e), std::move(p));
}

}  // namespace detail

/// Partial factorial takes `indices` into the full Cartesian enumeration
/// (first set slowest). Exact duplicate vectors are collapsed; the first
/// occurrence is kept and its multiplicity counted.
inline ConsideredParameterSet map_to_considered_vectors(std::span<const InferredValueSet> sets, MappingDesign design,
                                                        std::span<const std::size_t> indices = {}) {
  if (sets.empty()) throw ValidationError("mapping: no value sets");
  for (const auto& s : sets) {
    s.validate();
    if (s.values.empty()) throw ValidationError("mapping: value set '" + s.parameter + "' is empty");
    for (const auto& t : sets)
      if (&s != &t && s.parameter == t.parameter)
        throw ValidationError("mapping: parameter '" + s.parameter + "' appears twice");
  }
  ConsideredParameterSet out;
  out.design = design;

  if (design == MappingDesign::OneToOne) {
    const auto& ref = sets.front();
    for (const auto& s : sets) {
      if (s.mode != InferenceMode::Direct)
        throw ValidationError("one-to-one mapping: '" + s.parameter + "' is aggregated");
      if (s.dataset_ids != ref.dataset_ids)
        throw ValidationError("one-to-one mapping: '" + s.parameter + "' has misaligned dataset provenance");
    }
    std::vector<std::size_t> idx(sets.size());
    for (std::size_t r = 0; r < ref.values.size(); ++r) {
      std::fill(idx.begin(), idx.end(), r);
      out.vectors.push_back(detail::combine(sets, idx));
      out.multiplicity.push_back(1);
    }
    return out;
  }

  std::size_t total = 1;
  for (const auto& s : sets) total *= s.values.size();
  std::vector<std::size_t> picks;
  if (design == MappingDesign::FullFactorial) {
    picks.resize(total);
    std::iota(picks.begin(), picks.end(), 0);
  } else {
    if (indices.empty()) throw ValidationError("partial-factorial mapping: empty index subset");
    for (auto i : indices)
      if (i >= total) throw ValidationError("partial-factorial mapping: index " + std::to_string(i) + " out of range");
    picks.assign(indices.begin(), indices.end());
  }

  std::vector<std::size_t> idx(sets.size());
  for (auto k : picks) {
    std::size_t rem = k;
    for (std::size_t q = sets.size(); q-- > 0;) {
      idx[q] = rem % sets[q].values.size();
      rem /= sets[q].values.size();
    }
    auto v = detail::combine(sets, idx);
    auto dup = std::find_if(out.vectors.begin(), out.vectors.end(), [&](const auto& w) { return w.same_values(v); });
    if (dup != out.vectors.end()) {
      ++out.multiplicity[static_cast<std::size_t>(dup - out.vectors.begin())];
    } else {
      out.vectors.push_back(std::move(v));
      out.multiplicity.push_back(1);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// select_distribution

enum class DistributionKind { Exponential, Weibull };

inline std::string_view to_string(DistributionKind k) { return k == DistributionKind::Exponential ? "exponential" : "weibull"; }

inline DistributionKind distribution_from_string(std::string_view s) {
  if (s == "exponential") return DistributionKind::Exponential;
  if (s == "weibull") return DistributionKind::Weibull;
  throw ValidationError("unknown distribution family '" + std::string(s) + "'");
}

struct DistributionFit {
  DistributionKind kind = DistributionKind::Exponential;
  double rate = 0;   // eta: S(t) = exp(-(eta t)^shape)
  double shape = 1;
  double loglik = 0;
  double aic = 0;
  bool converged = false;
};

struct DistributionChoice {
  DistributionFit chosen;
  std::vector<DistributionFit> fits;
};

inline DistributionFit fit_exponential(std::span<const double> t) {
  const double n = static_cast<double>(t.size());
  const double s = std::accumulate(t.begin(), t.end(), 0.0);
  DistributionFit f;
  f.kind = DistributionKind::Exponential;
  f.rate = n / s;
  f.shape = 1;
  f.loglik = n * std::log(f.rate) - f.rate * s;
  f.aic = 2 * 1 - 2 * f.loglik;
  f.converged = std::isfinite(f.loglik);
  return f;
}

/// Shape solves sum(t^k ln t)/sum(t^k) - 1/k - mean(ln t) = 0 (monotone in k);
/// bracketed bisection followed by the closed-form scale.
inline DistributionFit fit_weibull(std::span<const double> t) {
  const double n = static_cast<double>(t.size());
  double tmax = 0, mean_log = 0;
  for (double v : t) {
    tmax = std::max(tmax, v);
    mean_log += std::log(v);
  }
  mean_log /= n;
  auto eq = [&](double k) {
    double a = 0, b = 0;
    for (double v : t) {
      const double w = std::pow(v / tmax, k);  // scaled for stability
      a += w * std::log(v);
      b += w;
    }
    return a / b - 1 / k - mean_log;
  };
  DistributionFit f;
  f.kind = DistributionKind::Weibull;
  double lo = 1e-3, hi = 1.0;
  while (eq(hi) < 0 && hi < 1e3) hi *= 2;
  if (eq(lo) > 0 || eq(hi) < 0) return f;  // not bracketed
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = (lo + hi) / 2;
    (eq(mid) < 0 ? lo : hi) = mid;
  }
  const double k = (lo + hi) / 2;
  double sk = 0;
  for (double v : t) sk += std::pow(v / tmax, k);
  const double scale = tmax * std::pow(sk / n, 1 / k);
  f.shape = k;
  f.rate = 1 / scale;
  double ll = n * std::log(k) - n * k * std::log(scale) + (k - 1) * n * mean_log;
  for (double v : t) ll -= std::pow(v / scale, k);
  f.loglik = ll;
  f.aic = 2 * 2 - 2 * ll;
  f.converged = std::isfinite(ll);
  return f;
}

/// ML fits on the uncensored observations; minimum AIC wins. `events` may be
/// empty (all observed).
inline DistributionChoice select_distribution(std::span<const double> times, std::span<const int> events,
                                              std::span<const DistributionKind> candidates) {
  if (candidates.empty()) throw ValidationError("select_distribution: no candidate families");
  if (!events.empty() && events.size() != times.size())
    throw ValidationError("select_distribution: times and events differ in length");
  std::vector<double> obs;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (events.empty() || events[i] == 1) {
      if (!(times[i] > 0)) throw ValidationError("select_distribution: observation times must be > 0");
      obs.push_back(times[i]);
    }
  if (obs.size() < 10) throw ValidationError("select_distribution: fewer than 10 usable observations");

  DistributionChoice out;
  for (auto c : candidates) out.fits.push_back(c == DistributionKind::Exponential ? fit_exponential(obs) : fit_weibull(obs));
  const DistributionFit* best = nullptr;
  for (const auto& f : out.fits)
    if (f.converged && (!best || f.aic < best->aic)) best = &f;
  if (!best) throw RuntimeFailure("select_distribution: no candidate fit converged");
  out.chosen = *best;
  return out;
}

// ---------------------------------------------------------------------------
// plausibility_check

/// A rule flags a vector when `violates` returns a message.
struct PlausibilityRule {
  std::string id;
  std::vector<std::string> parameters;  // must exist in every vector
  std::function<std::optional<std::string>(const ParameterVector&)> violates;
};

struct Violation {
  std::size_t vector_index = 0;
  std::string rule_id;
  std::string message;
};

inline PlausibilityRule bounds_rule(std::string id, std::string parameter, double lo, double hi) {
  auto p = parameter;
  return {std::move(id), {std::move(parameter)}, [p, lo, hi](const ParameterVector& v) -> std::optional<std::string> {
            auto check = [&](double x) { return x >= lo && x <= hi; };
            const auto& val = v.at(p);
            bool ok = true;
            if (const auto* d = std::get_if<double>(&val)) ok = check(*d);
            else if (const auto* t = std::get_if<std::vector<double>>(&val))
              ok = std::all_of(t->begin(), t->end(), check);
            if (ok) return std::nullopt;
            return p + " = " + format_value(val) + " outside [" + format_value(lo) + ", " + format_value(hi) + "]";
          }};
}

inline PlausibilityRule all_positive_rule(std::string id, std::string parameter) {
  auto p = parameter;
  return {std::move(id), {std::move(parameter)}, [p](const ParameterVector& v) -> std::optional<std::string> {
            const auto& val = v.at(p);
            std::vector<double> xs;
            if (const auto* d = std::get_if<double>(&val)) xs = {*d};
            else if (const auto* t = std::get_if<std::vector<double>>(&val)) xs = *t;
            for (std::size_t i = 0; i < xs.size(); ++i)
              if (!(xs[i] > 0)) return p + " has non-positive entry " + std::to_string(i + 1);
            return std::nullopt;
          }};
}

struct JointCondition {
  std::string parameter;
  Op op = Op::Le;
  double value = 0;
};

/// Flags vectors for which every condition holds at once.
inline PlausibilityRule joint_rule(std::string id, std::vector<JointCondition> when) {
  std::vector<std::string> params;
  for (const auto& c : when) params.push_back(c.parameter);
  return {std::move(id), std::move(params), [when](const ParameterVector& v) -> std::optional<std::string> {
            std::string msg;
            for (const auto& c : when) {
              const double x = v.number(c.parameter);
              bool hit = false;
              switch (c.op) {
                case Op::Eq: hit = x == c.value; break;
                case Op::Ne: hit = x != c.value; break;
                case Op::Lt: hit = x < c.value; break;
                case Op::Le: hit = x <= c.value; break;
                case Op::Gt: hit = x > c.value; break;
                case Op::Ge: hit = x >= c.value; break;
                default: throw ValidationError("joint rule: unsupported operator");
              }
              if (!hit) return std::nullopt;
              if (!msg.empty()) msg += " and ";
              msg += c.parameter + " = " + format_value(x);
            }
            return "joint condition met: " + msg;
          }};
}

inline std::vector<Violation> plausibility_check(const ConsideredParameterSet& set, std::span<const PlausibilityRule> rules) {
  for (const auto& r : rules)
    for (const auto& p : r.parameters)
      for (const auto& v : set.vectors)
        if (!v.has(p)) throw ValidationError("plausibility rule '" + r.id + "' references unknown parameter '" + p + "'");
  std::vector<Violation> out;
  for (std::size_t i = 0; i < set.vectors.size(); ++i)
    for (const auto& r : rules)
      if (auto msg = r.violates(set.vectors[i])) out.push_back({i, r.id, *msg});
  return out;
}

}  // namespace rdgm
