#pragma once

// Component taxonomy, parameter vectors and DGM instances.
//
// A data-generating mechanism is a model structure (one of four closed
// families plus discrete options) together with values for every parameter
// the structure requires. Researcher-specified values (lambda) and
// real-data-based values (theta) are kept in separate named vectors.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "rdgm/error.hpp"

namespace rdgm {

// ---------------------------------------------------------------------------
// Taxonomy

enum class ComponentKind { ModelStructurePart, Parameter };
enum class Specification { ResearcherInterest, ResearcherConvenience, RealDataBased };
enum class Knowledge { Known, Unknown };

struct ComponentSpec {
  std::string id;
  ComponentKind kind = ComponentKind::Parameter;
  Specification specification = Specification::ResearcherConvenience;
  Knowledge knowledge = Knowledge::Known;
  bool target_related = false;  // only meaningful when knowledge == Unknown
  std::optional<std::string> constraint;

  [[nodiscard]] bool researcher_specified() const {
    return specification != Specification::RealDataBased;
  }
  friend bool operator==(const ComponentSpec&, const ComponentSpec&) = default;
};

enum class Family { OrdinalTwoArm, SurvivalTwoArm, MetaAnalysis, DECounts };

inline std::string_view to_string(Family f) {
  switch (f) {
    case Family::OrdinalTwoArm: return "ordinal-two-arm";
    case Family::SurvivalTwoArm: return "survival-two-arm";
    case Family::MetaAnalysis: return "meta-analysis";
    case Family::DECounts: return "de-counts";
  }
  return "?";
}

inline Family family_from_string(std::string_view s) {
  for (auto f : {Family::OrdinalTwoArm, Family::SurvivalTwoArm, Family::MetaAnalysis, Family::DECounts})
    if (to_string(f) == s) return f;
  throw ValidationError("unknown model family '" + std::string(s) + "'");
}

inline std::string_view to_string(Specification s) {
  switch (s) {
    case Specification::ResearcherInterest: return "researcher-interest";
    case Specification::ResearcherConvenience: return "researcher-convenience";
    case Specification::RealDataBased: return "real-data-based";
  }
  return "?";
}

inline Specification specification_from_string(std::string_view s) {
  for (auto v : {Specification::ResearcherInterest, Specification::ResearcherConvenience,
                 Specification::RealDataBased})
    if (to_string(v) == s) return v;
  throw ValidationError("unknown specification class '" + std::string(s) + "'");
}

/// Model structure: a family plus its discrete options, e.g.
/// {"event_dist": "weibull", "weibull_shape": "1.5"} for survival.
struct ModelStructureConfig {
  Family family = Family::OrdinalTwoArm;
  std::map<std::string, std::string> options;

  friend bool operator==(const ModelStructureConfig&, const ModelStructureConfig&) = default;
};

/// Parameters the family's model structure requires. The structure fully
/// determines this set.
inline std::vector<std::string> required_parameters(Family f) {
  switch (f) {
    case Family::OrdinalTwoArm: return {"n_groups", "n_obs", "K", "pi1", "pi2"};
    case Family::SurvivalTwoArm: return {"n_groups", "n_obs", "eta1", "eta2", "u"};
    case Family::MetaAnalysis:
      return {"n_groups", "n_study", "theta", "tau2", "u_min", "u_max", "mu1", "sigma2"};
    case Family::DECounts:
      return {"n_groups", "n_obs", "G", "p_DE", "p_up", "minFC", "lambda_FC", "mu", "phi"};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Parameter vectors

/// A parameter value: scalar, numeric tuple (probability vectors, per-study
/// means) or a reference to an external parameter table (gene-wise mean and
/// dispersion files, which are redrawn per repetition).
using ParamValue = std::variant<double, std::vector<double>, std::string>;

enum class ProvenanceKind { Researcher, Dataset, Aggregated };

struct Provenance {
  ProvenanceKind kind = ProvenanceKind::Researcher;
  std::string source;  // dataset id or strategy descriptor

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

inline std::string_view to_string(ProvenanceKind k) {
  switch (k) {
    case ProvenanceKind::Researcher: return "researcher";
    case ProvenanceKind::Dataset: return "dataset";
    case ProvenanceKind::Aggregated: return "aggregated";
  }
  return "?";
}

inline ProvenanceKind provenance_from_string(std::string_view s) {
  for (auto k : {ProvenanceKind::Researcher, ProvenanceKind::Dataset, ProvenanceKind::Aggregated})
    if (to_string(k) == s) return k;
  throw ValidationError("unknown provenance '" + std::string(s) + "'");
}

inline std::string format_value(const ParamValue& v) {
  char buf[64];
  if (const auto* d = std::get_if<double>(&v)) {
    std::snprintf(buf, sizeof buf, "%.12g", *d);
    return buf;
  }
  if (const auto* t = std::get_if<std::vector<double>>(&v)) {
    std::string out = "(";
    for (std::size_t i = 0; i < t->size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.12g", (*t)[i]);
      if (i) out += ',';
      out += buf;
    }
    return out + ")";
  }
  return std::get<std::string>(v);
}

/// Named, ordered parameter entries.
class ParameterVector {
 public:
  using Entry = std::pair<std::string, ParamValue>;

  ParameterVector() = default;
  ParameterVector(std::vector<Entry> entries, Provenance provenance = {})
      : entries_(std::move(entries)), provenance_(std::move(provenance)) {
    for (std::size_t i = 0; i < entries_.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (entries_[i].first == entries_[j].first)
          throw ValidationError("duplicate parameter id '" + entries_[i].first + "'");
  }

  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }
  [[nodiscard]] const Provenance& provenance() const { return provenance_; }
  void set_provenance(Provenance p) { provenance_ = std::move(p); }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] bool empty() const { return entries_.empty(); }

  [[nodiscard]] bool has(std::string_view id) const { return find(id) != nullptr; }

  [[nodiscard]] const ParamValue* find(std::string_view id) const {
    for (const auto& [k, v] : entries_)
      if (k == id) return &v;
    return nullptr;
  }

  [[nodiscard]] const ParamValue& at(std::string_view id) const {
    if (const auto* v = find(id)) return *v;
    throw ValidationError("parameter '" + std::string(id) + "' not present");
  }

  void set(std::string id, ParamValue value) {
    for (auto& [k, v] : entries_)
      if (k == id) {
        v = std::move(value);
        return;
      }
    entries_.emplace_back(std::move(id), std::move(value));
  }

  [[nodiscard]] double number(std::string_view id) const {
    const auto& v = at(id);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    throw ValidationError("parameter '" + std::string(id) + "' is not a scalar");
  }

  [[nodiscard]] const std::vector<double>& tuple(std::string_view id) const {
    const auto& v = at(id);
    if (const auto* t = std::get_if<std::vector<double>>(&v)) return *t;
    throw ValidationError("parameter '" + std::string(id) + "' is not a tuple");
  }

  [[nodiscard]] const std::string& text(std::string_view id) const {
    const auto& v = at(id);
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    throw ValidationError("parameter '" + std::string(id) + "' is not a table reference");
  }

  [[nodiscard]] std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.first);
    return out;
  }

  /// Values only, in entry order; used for duplicate detection.
  [[nodiscard]] bool same_values(const ParameterVector& o) const { return entries_ == o.entries_; }

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

 private:
  std::vector<Entry> entries_;
  Provenance provenance_;
};

/// One fully specified generator.
struct DGMInstance {
  ModelStructureConfig structure;
  ParameterVector lambda;  // researcher-specified
  ParameterVector theta;   // real-data-based
  std::string label;

  /// Lookup across both vectors.
  [[nodiscard]] const ParamValue& param(std::string_view id) const {
    if (const auto* v = lambda.find(id)) return *v;
    return theta.at(id);
  }
  [[nodiscard]] double number(std::string_view id) const {
    return lambda.has(id) ? lambda.number(id) : theta.number(id);
  }
  [[nodiscard]] const std::vector<double>& tuple(std::string_view id) const {
    return lambda.has(id) ? lambda.tuple(id) : theta.tuple(id);
  }
  [[nodiscard]] const std::string& text(std::string_view id) const {
    return lambda.has(id) ? lambda.text(id) : theta.text(id);
  }

  /// Union of lambda and theta covers the family; no id in both.
  void validate() const {
    for (const auto& [id, _] : lambda.entries())
      if (theta.has(id))
        throw ValidationError("DGM '" + label + "': parameter '" + id + "' in both lambda and theta");
    for (const auto& id : required_parameters(structure.family))
      if (!lambda.has(id) && !theta.has(id))
        throw ValidationError("DGM '" + label + "': missing required parameter '" + id + "'");
  }

  friend bool operator==(const DGMInstance&, const DGMInstance&) = default;
};

// ---------------------------------------------------------------------------
// classify_components

/// Partition of the study's components. All id lists are sorted.
struct Taxonomy {
  std::vector<std::string> lambda_design;
  std::vector<std::string> lambda_target;
  std::vector<std::string> lambda_other;
  std::vector<std::string> theta_design;
  std::vector<std::string> theta_target;
  std::vector<std::string> theta_other;
  std::vector<std::string> structure_parts;

  [[nodiscard]] std::vector<std::string> lambda_estim() const {
    std::vector<std::string> out = lambda_target;
    out.insert(out.end(), lambda_other.begin(), lambda_other.end());
    std::sort(out.begin(), out.end());
    return out;
  }
  [[nodiscard]] std::vector<std::string> theta_estim() const {
    std::vector<std::string> out = theta_target;
    out.insert(out.end(), theta_other.begin(), theta_other.end());
    std::sort(out.begin(), out.end());
    return out;
  }

  friend bool operator==(const Taxonomy&, const Taxonomy&) = default;
};

inline Taxonomy classify_components(std::span<const ComponentSpec> components,
                                    const ModelStructureConfig& structure) {
  if (components.empty()) throw ValidationError("component list is empty");

  std::map<std::string, const ComponentSpec*> by_id;
  for (const auto& c : components) {
    if (c.id.empty()) throw ValidationError("component with empty id");
    auto [it, inserted] = by_id.emplace(c.id, &c);
    if (!inserted) {
      if (it->second->researcher_specified() != c.researcher_specified())
        throw ValidationError("parameter '" + c.id + "' declared in both lambda and theta");
      throw ValidationError("duplicate component id '" + c.id + "'");
    }
    if (c.target_related && c.knowledge == Knowledge::Known)
      throw ValidationError("component '" + c.id + "' is known but flagged target-related");
  }

  Taxonomy t;
  for (const auto& [id, c] : by_id) {  // map order: sorted by id
    if (c->kind == ComponentKind::ModelStructurePart) {
      t.structure_parts.push_back(id);
      continue;
    }
    const bool lambda = c->researcher_specified();
    if (c->knowledge == Knowledge::Known)
      (lambda ? t.lambda_design : t.theta_design).push_back(id);
    else if (c->target_related)
      (lambda ? t.lambda_target : t.theta_target).push_back(id);
    else
      (lambda ? t.lambda_other : t.theta_other).push_back(id);
  }

  for (const auto& req : required_parameters(structure.family)) {
    auto it = by_id.find(req);
    if (it == by_id.end() || it->second->kind != ComponentKind::Parameter)
      throw ValidationError("missing required parameter '" + req + "' for family " +
                            std::string(to_string(structure.family)));
  }
  return t;
}

// ---------------------------------------------------------------------------
// cross_design

/// One researcher-specified factor. Usually a single id with a list of
/// values; several ids vary jointly (e.g. sample size bound to a minimum fold
/// change, or a probability pair).
struct LambdaGrid {
  std::vector<std::string> ids;
  std::vector<std::vector<ParamValue>> rows;  // rows[i][j] is the value of ids[j]
  std::vector<std::string> labels;            // optional, one per row

  static LambdaGrid single(std::string id, std::vector<ParamValue> values) {
    LambdaGrid g;
    g.ids = {std::move(id)};
    for (auto& v : values) g.rows.push_back({std::move(v)});
    return g;
  }

  [[nodiscard]] std::size_t size() const { return rows.size(); }

  void validate() const {
    if (ids.empty()) throw ValidationError("lambda grid without parameter ids");
    if (rows.empty()) throw ValidationError("lambda grid for '" + ids.front() + "' is empty");
    for (const auto& r : rows)
      if (r.size() != ids.size())
        throw ValidationError("lambda grid for '" + ids.front() + "' has a malformed row");
    if (!labels.empty() && labels.size() != rows.size())
      throw ValidationError("lambda grid for '" + ids.front() + "' has mismatched labels");
  }
};

enum class CrossRule { FullCross, Paired };

namespace detail {

inline std::string grid_row_label(const LambdaGrid& g, std::size_t row) {
  if (!g.labels.empty()) return g.labels[row];
  std::string out;
  for (std::size_t j = 0; j < g.ids.size(); ++j) {
    if (j) out += ',';
    out += g.ids[j] + "=" + format_value(g.rows[row][j]);
  }
  return out;
}

inline DGMInstance make_instance(const ModelStructureConfig& structure, const ParameterVector& theta,
                                 std::span<const LambdaGrid> grids, std::span<const std::size_t> rows,
                                 std::size_t theta_index) {
  DGMInstance inst;
  inst.structure = structure;
  inst.theta = theta;
  std::vector<ParameterVector::Entry> lam;
  std::string label = theta.provenance().source.empty() ? "theta" + std::to_string(theta_index + 1)
                                                        : theta.provenance().source;
  if (theta.empty() && theta.provenance().source.empty()) label.clear();
  for (std::size_t g = 0; g < grids.size(); ++g) {
    for (std::size_t j = 0; j < grids[g].ids.size(); ++j) {
      if (theta.has(grids[g].ids[j]))
        throw ValidationError("parameter '" + grids[g].ids[j] + "' in both lambda and theta");
      lam.emplace_back(grids[g].ids[j], grids[g].rows[rows[g]][j]);
    }
    if (grids[g].size() > 1) {
      if (!label.empty()) label += '|';
      label += grid_row_label(grids[g], rows[g]);
    }
  }
  inst.lambda = ParameterVector(std::move(lam), {ProvenanceKind::Researcher, {}});
  inst.label = label.empty() ? "dgm" : label;
  return inst;
}

}  // namespace detail

/// Crosses considered parameter vectors with researcher grids. Full-cross
/// enumerates theta slowest, then the grids in declared order (last grid
/// fastest). Paired binds row l of every grid to theta vector l.
inline std::vector<DGMInstance> cross_design(std::span<const ParameterVector> theta_set,
                                             std::span<const LambdaGrid> grids, CrossRule rule,
                                             const ModelStructureConfig& structure) {
  if (theta_set.empty()) throw ValidationError("cross_design: empty considered parameter set");
  for (const auto& g : grids) g.validate();

  std::vector<DGMInstance> out;
  if (rule == CrossRule::Paired) {
    for (const auto& g : grids)
      if (g.size() != theta_set.size())
        throw ValidationError("cross_design(paired): grid for '" + g.ids.front() + "' has " +
                              std::to_string(g.size()) + " rows, expected " +
                              std::to_string(theta_set.size()));
    std::vector<std::size_t> rows(grids.size());
    for (std::size_t l = 0; l < theta_set.size(); ++l) {
      std::fill(rows.begin(), rows.end(), l);
      out.push_back(detail::make_instance(structure, theta_set[l], grids, rows, l));
    }
    return out;
  }

  std::size_t per_theta = 1;
  for (const auto& g : grids) per_theta *= g.size();
  out.reserve(theta_set.size() * per_theta);
  std::vector<std::size_t> rows(grids.size());
  for (std::size_t l = 0; l < theta_set.size(); ++l) {
    for (std::size_t k = 0; k < per_theta; ++k) {
      std::size_t rem = k;
      for (std::size_t g = grids.size(); g-- > 0;) {
        rows[g] = rem % grids[g].size();
        rem /= grids[g].size();
      }
      out.push_back(detail::make_instance(structure, theta_set[l], grids, rows, l));
    }
  }
  return out;
}

}  // namespace rdgm
