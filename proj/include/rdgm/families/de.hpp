#pragma once

// RNA-Seq style count generator for differential expression studies.
//
// Counts for gene g follow NB(mu_g * FC_g, phi_g) in group 1 and
// NB(mu_g, phi_g) in group 2, with variance m + phi m^2. A proportion p_DE of
// genes is differentially expressed; of those a proportion p_up is
// upregulated with FC = minFC + Exp(lambda_FC), the rest get the reciprocal.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "rdgm/error.hpp"
#include "rdgm/io/csv.hpp"
#include "rdgm/rng.hpp"

namespace rdgm {

struct DEConfig {
  std::int64_t n_obs = 0;
  std::size_t G = 0;
  double p_DE = 0;
  double p_up = 0.5;
  double minFC = 1.5;
  double lambda_FC = 1;
  std::vector<double> mu;
  std::vector<double> phi;

  void validate() const {
    if (n_obs < 2 || n_obs % 2 != 0) throw ValidationError("DE config: n_obs must be even and >= 2");
    if (!(p_DE >= 0 && p_DE <= 1)) throw ValidationError("DE config: p_DE must lie in [0,1]");
    if (!(p_up >= 0 && p_up <= 1)) throw ValidationError("DE config: p_up must lie in [0,1]");
    if (!(minFC > 1)) throw ValidationError("DE config: minFC must be > 1");
    if (!(lambda_FC > 0)) throw ValidationError("DE config: lambda_FC must be > 0");
    if (mu.size() != G || phi.size() != G) throw ValidationError("DE config: mu/phi length must equal G");
    for (std::size_t g = 0; g < G; ++g)
      if (!(mu[g] >= 0) || !(phi[g] >= 0)) throw ValidationError("DE config: mean and dispersion must be >= 0");
  }

  [[nodiscard]] std::size_t n_de() const { return static_cast<std::size_t>(std::llround(p_DE * static_cast<double>(G))); }
};

struct FoldChanges {
  std::vector<double> fc;
  std::vector<bool> is_de;
  std::vector<bool> is_up;

  [[nodiscard]] std::size_t count_de() const { return static_cast<std::size_t>(std::count(is_de.begin(), is_de.end(), true)); }
  [[nodiscard]] std::size_t count_up() const { return static_cast<std::size_t>(std::count(is_up.begin(), is_up.end(), true)); }
};

inline double fold_change_value(double min_fc, double rand_fc, bool up) {
  const double v = min_fc + rand_fc;
  return up ? v : 1.0 / v;
}

inline FoldChanges assign_fold_changes(const DEConfig& cfg, Rng& rng) {
  const std::size_t G = cfg.G;
  FoldChanges out{std::vector<double>(G, 1.0), std::vector<bool>(G, false), std::vector<bool>(G, false)};
  const std::size_t n_de = std::min(cfg.n_de(), G);
  const auto n_up = static_cast<std::size_t>(std::llround(cfg.p_up * static_cast<double>(n_de)));

  std::vector<std::size_t> idx(G);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n_de; ++i) {
    auto j = i + static_cast<std::size_t>(uniform_index(rng, G - i));
    std::swap(idx[i], idx[j]);
  }
  for (std::size_t i = 0; i < n_de; ++i) {
    const auto g = idx[i];
    const bool up = i < n_up;
    const double rand_fc = -std::log1p(-uniform01(rng)) / cfg.lambda_FC;
    out.fc[g] = fold_change_value(cfg.minFC, rand_fc, up);
    out.is_de[g] = true;
    out.is_up[g] = up;
  }
  return out;
}

/// One negative binomial draw (Gamma-Poisson mixture); phi = 0 is Poisson.
inline std::int64_t draw_negative_binomial(double mean, double phi, Rng& rng) {
  if (mean < 0) throw RuntimeFailure("negative binomial with negative mean");
  if (mean == 0) return 0;
  double rate = mean;
  if (phi > 0) {
    std::gamma_distribution<double> gamma(1.0 / phi, mean * phi);
    rate = gamma(rng);
    if (rate <= 0) return 0;
  }
  std::poisson_distribution<std::int64_t> pois(rate);
  return pois(rng);
}

/// Gene-major count matrix: counts[g * n_samples + i].
struct CountMatrix {
  std::size_t n_samples = 0;
  std::size_t n_genes = 0;
  std::vector<std::int64_t> counts;
  std::vector<int> group;  // 1 or 2 per sample; group 1 first

  [[nodiscard]] const std::int64_t* gene(std::size_t g) const { return counts.data() + g * n_samples; }
};

inline CountMatrix sample_counts(const DEConfig& cfg, const std::vector<double>& fc, Rng& rng) {
  if (fc.size() != cfg.G || cfg.mu.size() != cfg.G || cfg.phi.size() != cfg.G)
    throw ValidationError("sample_counts: vector lengths differ from G");
  CountMatrix m;
  m.n_samples = static_cast<std::size_t>(cfg.n_obs);
  m.n_genes = cfg.G;
  m.counts.resize(m.n_samples * m.n_genes);
  const std::size_t half = m.n_samples / 2;
  m.group.assign(m.n_samples, 2);
  std::fill(m.group.begin(), m.group.begin() + static_cast<std::ptrdiff_t>(half), 1);
  for (std::size_t g = 0; g < cfg.G; ++g) {
    const double mean1 = cfg.mu[g] * fc[g];
    auto* row = m.counts.data() + g * m.n_samples;
    for (std::size_t i = 0; i < m.n_samples; ++i)
      row[i] = draw_negative_binomial(i < half ? mean1 : cfg.mu[g], cfg.phi[g], rng);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Gene-wise mean/dispersion tables

struct ExpressionRow {
  std::string gene_id;
  double mean = 0;
  double dispersion = 0;
};

/// Filtered gene table of one source dataset.
struct ExpressionTable {
  std::string source;
  std::vector<ExpressionRow> rows;  // mean >= floor only
  std::size_t rows_before_filter = 0;
  double median_dispersion = 0;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw ValidationError("median of empty set");
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

/// Reads `gene_id, mean, dispersion`, drops genes with mean below the floor
/// and records the median dispersion of what remains.
inline ExpressionTable load_expression_table(const std::string& path, double mean_floor) {
  auto t = csv::read_file(path);
  const auto gi = t.require_column("gene_id");
  const auto mi = t.require_column("mean");
  const auto di = t.require_column("dispersion");
  ExpressionTable out;
  out.source = path;
  out.rows_before_filter = t.rows.size();
  std::vector<double> disp;
  for (const auto& r : t.rows) {
    ExpressionRow row{r[gi], std::stod(r[mi]), std::stod(r[di])};
    if (row.mean < mean_floor) continue;
    if (row.dispersion < 0) throw ValidationError(path + ": negative dispersion for gene " + row.gene_id);
    disp.push_back(row.dispersion);
    out.rows.push_back(std::move(row));
  }
  if (out.rows.empty()) throw ValidationError(path + ": insufficient rows after mean filter");
  out.median_dispersion = median(std::move(disp));
  return out;
}

struct ExpressionParams {
  std::vector<double> mu;
  std::vector<double> phi;
  double median_dispersion = 0;
};

/// Uniform draw of G rows without replacement from a filtered table.
inline ExpressionParams draw_expression_params(const ExpressionTable& table, std::size_t G, Rng& rng) {
  if (table.rows.size() < G)
    throw ValidationError(table.source + ": insufficient rows after filtering (" + std::to_string(table.rows.size()) +
                          " < " + std::to_string(G) + ")");
  std::vector<std::size_t> idx(table.rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  ExpressionParams p;
  p.mu.reserve(G);
  p.phi.reserve(G);
  for (std::size_t i = 0; i < G; ++i) {
    auto j = i + static_cast<std::size_t>(uniform_index(rng, idx.size() - i));
    std::swap(idx[i], idx[j]);
    p.mu.push_back(table.rows[idx[i]].mean);
    p.phi.push_back(table.rows[idx[i]].dispersion);
  }
  p.median_dispersion = table.median_dispersion;
  return p;
}

inline ExpressionParams load_expression_params(const std::string& path, std::size_t G_target, double mean_floor,
                                               Rng& rng) {
  return draw_expression_params(load_expression_table(path, mean_floor), G_target, rng);
}

}  // namespace rdgm
