#pragma once

// Replication runner. Each (dgm, rep) unit draws from its own counter-seeded
// stream, so records are identical for any worker count. Units are claimed
// from a shared counter and written into preallocated slots; aggregation
// then folds over the slots in index order.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "rdgm/core.hpp"
#include "rdgm/error.hpp"
#include "rdgm/families/de.hpp"
#include "rdgm/families/meta.hpp"
#include "rdgm/families/ordinal.hpp"
#include "rdgm/families/survival.hpp"
#include "rdgm/io/csv.hpp"
#include "rdgm/io/json.hpp"
#include "rdgm/rng.hpp"
#include "rdgm/stats/de_scores.hpp"
#include "rdgm/stats/heterogeneity.hpp"
#include "rdgm/stats/performance.hpp"
#include "rdgm/stats/po_logit.hpp"
#include "rdgm/stats/registry.hpp"
#include "rdgm/stats/survival.hpp"
#include "rdgm/stats/tests.hpp"

#ifndef RDGM_VERSION
#define RDGM_VERSION "0.1.0"
#endif

namespace rdgm {

inline constexpr const char* kVersion = RDGM_VERSION;

struct StudyPlan {
  std::vector<DGMInstance> dgms;
  std::vector<std::string> methods;
  std::size_t n_rep = 0;
  std::uint64_t master_seed = 0;
  double alpha = 0.05;
  std::string validity_filter = "none";
  std::optional<std::size_t> min_valid_reps;  // default 80% of n_rep
  std::int64_t fisher_B = 1000;
  double mean_floor = 10;  // DE gene filter

  [[nodiscard]] std::size_t effective_min_valid() const {
    if (min_valid_reps) return *min_valid_reps;
    return static_cast<std::size_t>(std::ceil(0.8 * static_cast<double>(n_rep)));
  }

  void validate() const {
    if (n_rep < 1) throw ValidationError("plan: n_rep must be >= 1");
    if (dgms.empty()) throw ValidationError("plan: no DGMs");
    if (methods.empty()) throw ValidationError("plan: no methods");
    if (!(alpha > 0 && alpha < 1)) throw ValidationError("plan: alpha must lie in (0,1)");
    if (fisher_B < 1000) throw ValidationError("plan: fisher_B must be >= 1000");
    if (validity_filter != "none" && validity_filter != "all-categories")
      throw ValidationError("plan: unknown validity filter '" + validity_filter + "'");
    for (const auto& d : dgms) {
      d.validate();
      for (const auto& m : methods)
        if (stats::find_method(m).family != d.structure.family)
          throw ValidationError("plan: method '" + m + "' does not apply to DGM '" + d.label + "' (" +
                                std::string(to_string(d.structure.family)) + ")");
      if (validity_filter == "all-categories" && d.structure.family != Family::OrdinalTwoArm)
        throw ValidationError("plan: validity filter 'all-categories' needs an ordinal family");
    }
  }
};

// ---------------------------------------------------------------------------
// filter_validity

struct Validity {
  bool valid = true;
  std::string reason;
};

inline Validity filter_validity(const TwoByK& t, std::string_view predicate) {
  if (predicate == "none") return {};
  if (predicate != "all-categories") throw ValidationError("unknown validity filter '" + std::string(predicate) + "'");
  for (std::size_t k = 0; k < t.categories(); ++k)
    if (t.column(k) == 0) return {false, "category " + std::to_string(k + 1) + " unobserved"};
  return {};
}

inline Validity filter_validity(const OrdinalData& d, std::string_view predicate) {
  return filter_validity(d.table(), predicate);
}

// ---------------------------------------------------------------------------
// DGM preparation

namespace detail {

struct DEPrepared {
  DEConfig config;  // mu/phi empty when drawn from a table
  std::shared_ptr<const ExpressionTable> table;
};

using Prepared = std::variant<OrdinalTwoArmConfig, SurvivalTwoArmConfig, MetaAnalysisConfig, DEPrepared>;

inline std::int64_t integer_param(const DGMInstance& d, std::string_view id) {
  const double v = d.number(id);
  if (v != std::floor(v)) throw ValidationError("parameter '" + std::string(id) + "' must be an integer");
  return static_cast<std::int64_t>(v);
}

inline void check_two_groups(const DGMInstance& d) {
  if (integer_param(d, "n_groups") != 2) throw ValidationError("only n_groups = 2 is supported");
}

using TableCache = std::map<std::string, std::shared_ptr<const ExpressionTable>>;

inline Prepared prepare(const DGMInstance& d, double mean_floor, TableCache& cache) {
  check_two_groups(d);
  switch (d.structure.family) {
    case Family::OrdinalTwoArm: {
      auto c = OrdinalTwoArmConfig::make(integer_param(d, "n_obs"), d.tuple("pi1"), d.tuple("pi2"));
      if (static_cast<std::int64_t>(c.K) != integer_param(d, "K"))
        throw ValidationError("K does not match the length of the probability tuples");
      return c;
    }
    case Family::SurvivalTwoArm: {
      SurvivalTwoArmConfig c;
      c.n_obs = integer_param(d, "n_obs");
      c.eta1 = d.number("eta1");
      c.eta2 = d.number("eta2");
      c.u = d.number("u");
      if (auto it = d.structure.options.find("event_dist"); it != d.structure.options.end()) {
        if (it->second == "weibull") c.event_dist = EventDist::Weibull;
        else if (it->second != "exponential") throw ValidationError("unknown event_dist '" + it->second + "'");
      }
      if (auto it = d.structure.options.find("weibull_shape"); it != d.structure.options.end())
        c.weibull_shape = std::stod(it->second);
      c.validate();
      return c;
    }
    case Family::MetaAnalysis: {
      MetaAnalysisConfig c;
      c.n_study = static_cast<std::size_t>(integer_param(d, "n_study"));
      c.theta = d.number("theta");
      c.tau2 = d.number("tau2");
      c.u_min = d.number("u_min");
      c.u_max = d.number("u_max");
      c.sigma2 = d.number("sigma2");
      if (const auto* t = std::get_if<std::vector<double>>(&d.param("mu1"))) c.mu1 = *t;
      else c.mu1.assign(c.n_study, d.number("mu1"));
      c.validate();
      return c;
    }
    case Family::DECounts: {
      DEPrepared p;
      auto& c = p.config;
      c.n_obs = integer_param(d, "n_obs");
      c.G = static_cast<std::size_t>(integer_param(d, "G"));
      c.p_DE = d.number("p_DE");
      c.p_up = d.number("p_up");
      c.minFC = d.number("minFC");
      c.lambda_FC = d.number("lambda_FC");
      const auto& mu = d.param("mu");
      if (const auto* path = std::get_if<std::string>(&mu)) {
        if (d.text("phi") != *path) throw ValidationError("mu and phi must reference the same expression table");
        auto& slot = cache[*path];
        if (!slot) slot = std::make_shared<const ExpressionTable>(load_expression_table(*path, mean_floor));
        p.table = slot;
        if (slot->rows.size() < c.G)
          throw ValidationError(*path + ": insufficient rows after filtering (" + std::to_string(slot->rows.size()) +
                                " < " + std::to_string(c.G) + ")");
        c.mu.assign(c.G, 0);
        c.phi.assign(c.G, 0);
        c.validate();
        c.mu.clear();
        c.phi.clear();
      } else {
        c.mu = d.tuple("mu");
        c.phi = d.tuple("phi");
        c.validate();
      }
      return p;
    }
  }
  throw ValidationError("unhandled family");
}

}  // namespace detail

/// Covariate reported next to each summary row.
struct Covariate {
  std::string name;
  std::optional<double> value;
};

inline Covariate dgm_covariate(const DGMInstance& d, double mean_floor = 10) {
  switch (d.structure.family) {
    case Family::OrdinalTwoArm: return {"rel_effect_dev", relative_effect(d.tuple("pi1"), d.tuple("pi2")).deviation};
    case Family::DECounts: {
      const auto& phi = d.param("phi");
      if (const auto* path = std::get_if<std::string>(&phi)) return {"median_dispersion", load_expression_table(*path, mean_floor).median_dispersion};
      return {"median_dispersion", median(std::get<std::vector<double>>(phi))};
    }
    default: return {};
  }
}

// ---------------------------------------------------------------------------
// run_study

struct RepRecord {
  std::uint32_t dgm = 0;
  std::uint32_t rep = 0;
  std::uint16_t method = 0;  // index into plan.methods
  bool valid = false;
  bool failed = false;
  double value = 0;  // p-value, AUC or estimate; meaningful iff valid && !failed
};

struct StudyResult {
  std::vector<RepRecord> records;        // (dgm, rep, method) order
  std::vector<std::string> invalid_reason;  // per (dgm, rep); empty if valid
  std::vector<Covariate> covariates;     // per dgm
  double seconds = 0;
};

struct RunOptions {
  unsigned workers = 0;  // 0 = hardware concurrency
  std::function<void(std::size_t dgm_index, const std::string& label)> on_dgm_done;
};

namespace detail {

inline std::uint64_t method_seed(std::uint64_t stream, std::size_t method) {
  return splitmix64(stream ^ (0xa0761d6478bd642fULL * (method + 1)));
}

/// Generates one dataset and evaluates all methods. Random draws happen in a
/// fixed order on the unit's stream; Monte Carlo tests get their own seed
/// derived from the stream seed.
inline void run_unit(const StudyPlan& plan, const Prepared& prep, std::size_t d, std::size_t s,
                     RepRecord* out, std::string& invalid) {
  const std::uint64_t seed = stream_seed(plan.master_seed, d, s);
  Rng rng(seed);
  const std::size_t M = plan.methods.size();
  for (std::size_t m = 0; m < M; ++m) {
    out[m].dgm = static_cast<std::uint32_t>(d);
    out[m].rep = static_cast<std::uint32_t>(s);
    out[m].method = static_cast<std::uint16_t>(m);
  }
  auto put = [&](std::size_t m, const stats::TestResult& r) {
    out[m].valid = true;
    out[m].failed = r.failed();
    out[m].value = r.p_value.value_or(0.0);
  };

  std::visit(
      [&](const auto& cfg) {
        using T = std::decay_t<decltype(cfg)>;
        if constexpr (std::is_same_v<T, OrdinalTwoArmConfig>) {
          const auto table = sample_ordinal(cfg, rng).table();
          auto v = filter_validity(table, plan.validity_filter);
          if (!v.valid) {
            invalid = std::move(v.reason);
            return;
          }
          for (std::size_t m = 0; m < M; ++m) {
            const auto& id = plan.methods[m];
            if (id == "chisq") put(m, stats::chi_square_test(table));
            else if (id == "fisher-mc") put(m, stats::fisher_exact_mc(table, plan.fisher_B, method_seed(seed, m)));
            else if (id == "wilcoxon") put(m, stats::wilcoxon_rank_sum(table));
            else if (id == "po-logit") put(m, stats::po_logistic_test(table));
          }
        } else if constexpr (std::is_same_v<T, SurvivalTwoArmConfig>) {
          const auto data = sample_survival(cfg, rng);
          for (std::size_t m = 0; m < M; ++m) put(m, stats::logrank_test(data.y, data.d, data.x));
        } else if constexpr (std::is_same_v<T, MetaAnalysisConfig>) {
          const auto data = sample_meta(cfg, rng);
          for (std::size_t m = 0; m < M; ++m) {
            out[m].valid = true;
            out[m].value = stats::tau2_estimate(data.g, data.variance,
                                                plan.methods[m] == "tau2-dl" ? stats::Tau2Method::DL : stats::Tau2Method::SJ);
          }
        } else {
          DEConfig c = cfg.config;
          if (cfg.table) {
            auto params = draw_expression_params(*cfg.table, c.G, rng);
            c.mu = std::move(params.mu);
            c.phi = std::move(params.phi);
          }
          const auto fc = assign_fold_changes(c, rng);
          const auto counts = sample_counts(c, fc.fc, rng);
          for (std::size_t m = 0; m < M; ++m) {
            const auto method = plan.methods[m] == "de-logt" ? stats::DEScoreMethod::LogT : stats::DEScoreMethod::RankSum;
            const auto sc = stats::de_gene_scores(counts, method);
            out[m].valid = true;
            if (fc.count_de() == 0 || fc.count_de() == c.G) {
              out[m].failed = true;  // AUC undefined
            } else {
              out[m].value = stats::auc_score(sc.score, fc.is_de);
            }
          }
        }
      },
      prep);
}

}  // namespace detail

inline StudyResult run_study(const StudyPlan& plan, const RunOptions& opt = {}) {
  plan.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t D = plan.dgms.size(), S = plan.n_rep, M = plan.methods.size();

  StudyResult res;
  std::vector<detail::Prepared> prepared;
  detail::TableCache cache;
  for (const auto& d : plan.dgms) {
    try {
      prepared.push_back(detail::prepare(d, plan.mean_floor, cache));
      res.covariates.push_back(dgm_covariate(d, plan.mean_floor));
    } catch (const ValidationError& e) {
      throw ValidationError("DGM '" + d.label + "': " + e.what());
    }
  }

  res.records.resize(D * S * M);
  res.invalid_reason.resize(D * S);
  std::vector<std::atomic<std::size_t>> done(D);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::string error_label;
  std::mutex mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t u = next.fetch_add(1, std::memory_order_relaxed);
      if (u >= D * S || stop.load(std::memory_order_relaxed)) return;
      const std::size_t d = u / S, s = u % S;
      try {
        detail::run_unit(plan, prepared[d], d, s, &res.records[u * M], res.invalid_reason[u]);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) {
          error = std::current_exception();
          error_label = plan.dgms[d].label;
        }
        stop = true;
        return;
      }
      if (done[d].fetch_add(1) + 1 == S && opt.on_dgm_done) {
        std::lock_guard lock(mu);
        opt.on_dgm_done(d, plan.dgms[d].label);
      }
    }
  };

  unsigned n = opt.workers ? opt.workers : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, D * S));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  if (error) {
    try {
      std::rethrow_exception(error);
    } catch (const std::exception& e) {
      throw RuntimeFailure("DGM '" + error_label + "': " + e.what());
    }
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// ---------------------------------------------------------------------------
// summarize

struct SummaryRecord {
  std::string dgm_label;
  Family family = Family::OrdinalTwoArm;
  std::string method;
  stats::Measure measure = stats::Measure::Power;
  std::optional<double> estimate;
  std::optional<double> mcse;
  std::size_t n_valid = 0;
  std::size_t n_failures = 0;
  bool excluded = false;
  std::string excluded_reason;
  Covariate covariate;
};

inline std::vector<SummaryRecord> summarize(const StudyResult& res, const StudyPlan& plan) {
  const std::size_t D = plan.dgms.size(), S = plan.n_rep, M = plan.methods.size();
  if (res.records.size() != D * S * M) throw ValidationError("summarize: records incomplete for the plan");
  const std::size_t threshold = plan.effective_min_valid();
  std::vector<SummaryRecord> out;
  for (std::size_t d = 0; d < D; ++d) {
    std::size_t n_valid = 0;
    for (std::size_t s = 0; s < S; ++s) n_valid += res.invalid_reason[d * S + s].empty();
    for (std::size_t m = 0; m < M; ++m) {
      SummaryRecord r;
      r.dgm_label = plan.dgms[d].label;
      r.family = plan.dgms[d].structure.family;
      r.method = plan.methods[m];
      r.measure = stats::find_method(r.method).measure;
      r.n_valid = n_valid;
      r.covariate = d < res.covariates.size() ? res.covariates[d] : Covariate{};
      std::size_t used = 0, hits = 0;
      double sum = 0;
      for (std::size_t s = 0; s < S; ++s) {
        const auto& rec = res.records[(d * S + s) * M + m];
        if (!rec.valid) continue;
        if (rec.failed) {
          ++r.n_failures;
          continue;
        }
        ++used;
        sum += rec.value;
        hits += rec.value <= plan.alpha;
      }
      if (n_valid < threshold) {
        r.excluded = true;
        r.excluded_reason = "n_valid " + std::to_string(n_valid) + " < " + std::to_string(threshold);
      } else if (used > 0) {
        if (r.measure == stats::Measure::Power) {
          r.estimate = static_cast<double>(hits) / static_cast<double>(used);
          r.mcse = stats::proportion_mcse(*r.estimate, used);
        } else {
          r.estimate = sum / static_cast<double>(used);
        }
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// export

inline const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols{"dgm_label", "family", "method", "measure", "estimate", "mcse",
                                             "n_valid", "n_failures", "excluded", "covariate_name", "covariate_value"};
  return cols;
}

inline std::string fixed(std::optional<double> v, int digits = 8) {
  if (!v) return {};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  return buf;
}

inline std::string summary_csv(const std::vector<SummaryRecord>& rows) {
  std::ostringstream out;
  csv::write_row(out, summary_columns());
  for (const auto& r : rows)
    csv::write_row(out, {r.dgm_label, std::string(to_string(r.family)), r.method, std::string(stats::to_string(r.measure)),
                         fixed(r.excluded ? std::nullopt : r.estimate), fixed(r.excluded ? std::nullopt : r.mcse),
                         std::to_string(r.n_valid), std::to_string(r.n_failures), r.excluded ? "true" : "false",
                         r.covariate.name, fixed(r.covariate.value)});
  return out.str();
}

inline void write_records_jsonl(std::ostream& out, const StudyResult& res, const StudyPlan& plan) {
  const std::size_t S = plan.n_rep;
  char buf[64];
  for (const auto& r : res.records) {
    const auto& reason = res.invalid_reason[r.dgm * S + r.rep];
    io::ojson j = {{"dgm", plan.dgms[r.dgm].label}, {"dgm_index", r.dgm}, {"rep", r.rep},
                   {"method", plan.methods[r.method]}, {"valid", r.valid}};
    if (!r.valid) j["invalid_reason"] = reason;
    else if (r.failed) j["failed"] = true;
    else {
      std::snprintf(buf, sizeof buf, "%.17g", r.value);
      j["value"] = std::stod(buf);
    }
    out << j.dump() << '\n';
  }
}

inline io::ojson plan_to_json(const StudyPlan& plan) {
  io::ojson dgms = io::ojson::array();
  for (const auto& d : plan.dgms) dgms.push_back(io::to_json(d));
  io::ojson j = {{"n_rep", plan.n_rep},
                 {"master_seed", plan.master_seed},
                 {"alpha", plan.alpha},
                 {"validity_filter", plan.validity_filter},
                 {"min_valid_reps", plan.effective_min_valid()},
                 {"fisher_B", plan.fisher_B},
                 {"mean_floor", plan.mean_floor},
                 {"methods", plan.methods},
                 {"dgms", dgms}};
  return j;
}

/// Expression tables referenced by the plan.
inline std::vector<std::string> plan_fixtures(const StudyPlan& plan) {
  std::vector<std::string> out;
  for (const auto& d : plan.dgms)
    for (const auto* v : {d.lambda.find("mu"), d.theta.find("mu")})
      if (v)
        if (const auto* p = std::get_if<std::string>(v); p && std::find(out.begin(), out.end(), *p) == out.end())
          out.push_back(*p);
  return out;
}

struct ExportPaths {
  std::string summary;
  std::string records;
  std::string manifest;
};

/// Writes summary CSV, repetition records and the manifest into `dir`.
inline ExportPaths export_results(const std::string& dir, const std::vector<SummaryRecord>& summary,
                                  const StudyResult& res, const StudyPlan& plan) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create output directory " + dir + ": " + ec.message());
  ExportPaths p{(fs::path(dir) / "summary.csv").string(), (fs::path(dir) / "records.jsonl").string(),
                (fs::path(dir) / "manifest.json").string()};
  auto open = [](const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw RuntimeFailure("cannot write " + path);
    return f;
  };
  const std::string csv_text = summary_csv(summary);
  {
    auto f = open(p.summary);
    f << csv_text;
    if (!f) throw RuntimeFailure("write failed: " + p.summary);
  }
  {
    auto f = open(p.records);
    write_records_jsonl(f, res, plan);
    if (!f) throw RuntimeFailure("write failed: " + p.records);
  }
  io::ojson fixtures = io::ojson::object();
  for (const auto& path : plan_fixtures(plan)) fixtures[path] = io::hex64(io::fnv1a(io::read_text(path)));
  io::ojson manifest = {{"software", "rdgm"},
                        {"version", kVersion},
                        {"master_seed", plan.master_seed},
                        {"n_rep", plan.n_rep},
                        {"plan_hash", io::hex64(io::fnv1a(plan_to_json(plan).dump()))},
                        {"fixture_hashes", fixtures},
                        {"results_hash", io::hex64(io::fnv1a(csv_text))},
                        {"summary", fs::path(p.summary).filename().string()},
                        {"records", fs::path(p.records).filename().string()}};
  {
    auto f = open(p.manifest);
    f << manifest.dump(2) << '\n';
    if (!f) throw RuntimeFailure("write failed: " + p.manifest);
  }
  return p;
}

}  // namespace rdgm
