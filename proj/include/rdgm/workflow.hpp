#pragma once

// Study configuration and the five workflow commands. A config is one JSON
// file; relative paths inside it are resolved against the file's directory.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rdgm/core.hpp"
#include "rdgm/engine.hpp"
#include "rdgm/error.hpp"
#include "rdgm/inference.hpp"
#include "rdgm/io/csv.hpp"
#include "rdgm/io/json.hpp"
#include "rdgm/selection.hpp"

namespace rdgm {

using io::ojson;

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitTooFew = 3, kExitRuntime = 4 };

struct SelectionConfig {
  std::string database;
  std::string criteria;
  std::size_t min = 1;
  std::size_t max = SIZE_MAX;
  std::uint64_t seed = 0;
  std::vector<SubsetRule> subset_rules;
};

struct AggregateConfig {
  std::string parameter;
  AggregateStrategy strategy;
};

struct InferenceConfig {
  std::vector<EstimatorBinding> estimators;
  std::vector<AggregateConfig> aggregate;
  MappingDesign design = MappingDesign::OneToOne;
  std::vector<std::size_t> indices;
  std::vector<PlausibilityRule> plausibility;
};

/// One group of DGMs: theta from inference (or none) crossed with grids.
struct DesignBlock {
  std::string name;
  bool inferred_theta = true;
  std::vector<LambdaGrid> grids;
  CrossRule rule = CrossRule::FullCross;
};

struct StudyConfig {
  std::filesystem::path base_dir;
  std::string name = "study";
  ModelStructureConfig structure;
  std::vector<ComponentSpec> components;
  std::optional<SelectionConfig> selection;
  std::optional<InferenceConfig> inference;
  std::vector<DesignBlock> design;
  StudyPlan engine;  // dgms filled by the plan step
  std::string out_dir = "out";
  std::vector<std::string> report_highlight;

  [[nodiscard]] std::string resolve(const std::string& p) const {
    std::filesystem::path path(p);
    if (path.is_relative()) path = base_dir / path;
    return path.lexically_normal().string();
  }
  [[nodiscard]] std::string out_path(const std::string& file) const {
    return (std::filesystem::path(out_dir) / file).string();
  }
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

struct Cursor {
  const ojson& j;
  std::string where;

  [[nodiscard]] bool has(const char* k) const { return j.is_object() && j.contains(k); }

  [[nodiscard]] Cursor at(const char* k) const {
    if (!has(k)) throw ValidationError(where + ": missing key '" + k + "'");
    return {j[k], where + "." + k};
  }
  [[nodiscard]] Cursor at(std::size_t i) const { return {j[i], where + "[" + std::to_string(i) + "]"}; }

  [[nodiscard]] std::string str() const {
    if (!j.is_string()) throw ValidationError(where + ": expected a string");
    return j.get<std::string>();
  }
  [[nodiscard]] double num() const {
    if (!j.is_number()) throw ValidationError(where + ": expected a number");
    return j.get<double>();
  }
  [[nodiscard]] std::uint64_t uint() const {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
      throw ValidationError(where + ": expected a non-negative integer");
    return j.get<std::uint64_t>();
  }
  [[nodiscard]] bool boolean() const {
    if (!j.is_boolean()) throw ValidationError(where + ": expected true or false");
    return j.get<bool>();
  }
  [[nodiscard]] std::size_t size() const {
    if (!j.is_array()) throw ValidationError(where + ": expected an array");
    return j.size();
  }
  [[nodiscard]] std::vector<std::string> strings() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).str());
    return out;
  }
  template <class T>
  [[nodiscard]] T value(const char* k, T fallback) const {
    if (!has(k)) return fallback;
    if constexpr (std::is_same_v<T, std::string>) return at(k).str();
    else if constexpr (std::is_same_v<T, bool>) return at(k).boolean();
    else if constexpr (std::is_floating_point_v<T>) return at(k).num();
    else return static_cast<T>(at(k).uint());
  }
};

inline ComponentSpec parse_component(const Cursor& c) {
  ComponentSpec s;
  s.id = c.at("id").str();
  const auto kind = c.value<std::string>("kind", "parameter");
  if (kind == "parameter") s.kind = ComponentKind::Parameter;
  else if (kind == "structure") s.kind = ComponentKind::ModelStructurePart;
  else throw ValidationError(c.where + ".kind: expected 'parameter' or 'structure'");
  s.specification = specification_from_string(c.at("specification").str());
  const auto k = c.value<std::string>("knowledge", "known");
  if (k == "known") s.knowledge = Knowledge::Known;
  else if (k == "unknown") s.knowledge = Knowledge::Unknown;
  else throw ValidationError(c.where + ".knowledge: expected 'known' or 'unknown'");
  s.target_related = c.value<bool>("target", false);
  if (c.has("constraint")) s.constraint = c.at("constraint").str();
  return s;
}

inline SubsetRule parse_subset_rule(const Cursor& c) {
  const auto type = c.at("rule").str();
  SubsetRule r;
  if (type == "largest-arms") r = SubsetRule::largest_arms(c.value<std::size_t>("count", 2), c.value<std::string>("key", "arms"));
  else if (type == "outcome-priority") r = SubsetRule::outcome_priority(c.value<std::string>("key", "outcome_priority"));
  else if (type == "outcome-largest-n") r = SubsetRule::outcome_largest_n(c.value<std::string>("key", "outcome_n"));
  else if (type == "require-complete") r = SubsetRule::require_complete(c.value<std::string>("key", "outcome_complete"));
  else throw ValidationError(c.where + ".rule: unknown subset rule '" + type + "'");
  return r;
}

inline Op parse_op(const Cursor& c) {
  static const std::map<std::string, Op> ops{{"=", Op::Eq}, {"==", Op::Eq}, {"!=", Op::Ne}, {"<", Op::Lt},
                                             {"<=", Op::Le}, {">", Op::Gt}, {">=", Op::Ge}};
  auto it = ops.find(c.str());
  if (it == ops.end()) throw ValidationError(c.where + ": unknown operator '" + c.str() + "'");
  return it->second;
}

inline PlausibilityRule parse_rule(const Cursor& c) {
  const auto type = c.at("type").str();
  const auto id = c.value<std::string>("id", type);
  if (type == "bounds") {
    return bounds_rule(id, c.at("parameter").str(), c.value<double>("min", -HUGE_VAL), c.value<double>("max", HUGE_VAL));
  }
  if (type == "all-positive") return all_positive_rule(id, c.at("parameter").str());
  if (type == "joint") {
    std::vector<JointCondition> when;
    const auto w = c.at("when");
    for (std::size_t i = 0; i < w.size(); ++i) {
      const auto e = w.at(i);
      when.push_back({e.at("parameter").str(), parse_op(e.at("op")), e.at("value").num()});
    }
    return joint_rule(id, std::move(when));
  }
  throw ValidationError(c.where + ".type: unknown plausibility rule '" + type + "'");
}

inline ParamValue parse_value(const Cursor& c) { return io::param_from_json(c.j, c.where); }

/// Grid rows either inline or from a CSV with one column per scalar id and
/// `<prefix>1..K` columns per tuple id.
inline LambdaGrid parse_grid(const Cursor& c, const StudyConfig& cfg) {
  LambdaGrid g;
  if (c.has("id")) {
    g.ids = {c.at("id").str()};
    const auto vals = c.at("values");
    for (std::size_t i = 0; i < vals.size(); ++i) g.rows.push_back({parse_value(vals.at(i))});
  } else {
    g.ids = c.at("ids").strings();
    if (c.has("csv")) {
      const auto path = cfg.resolve(c.at("csv").str());
      const auto table = csv::read_file(path);
      const auto label_col = c.value<std::string>("label_column", "");
      std::map<std::string, std::string> prefixes;
      if (c.has("prefixes"))
        for (const auto& [k, v] : c.at("prefixes").j.items()) prefixes[k] = v.get<std::string>();
      for (const auto& row : table.rows) {
        std::vector<ParamValue> vals;
        for (const auto& id : g.ids) {
          if (auto it = prefixes.find(id); it != prefixes.end()) {
            std::vector<double> t;
            for (int k = 1; table.column(it->second + std::to_string(k)) >= 0; ++k)
              t.push_back(std::stod(row[table.require_column(it->second + std::to_string(k))]));
            if (t.empty()) throw ValidationError(path + ": no columns with prefix '" + it->second + "'");
            vals.emplace_back(std::move(t));
          } else {
            vals.emplace_back(std::stod(row[table.require_column(id)]));
          }
        }
        g.rows.push_back(std::move(vals));
        if (!label_col.empty()) g.labels.push_back(row[table.require_column(label_col)]);
      }
    } else {
      const auto rows = c.at("rows");
      for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<ParamValue> vals;
        const auto r = rows.at(i);
        for (std::size_t j = 0; j < r.size(); ++j) vals.push_back(parse_value(r.at(j)));
        g.rows.push_back(std::move(vals));
      }
      if (c.has("labels")) g.labels = c.at("labels").strings();
    }
  }
  try {
    g.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(c.where + ": " + e.what());
  }
  return g;
}

}  // namespace detail

inline StudyConfig parse_config(const ojson& j, const std::filesystem::path& base_dir) {
  using detail::Cursor;
  StudyConfig cfg;
  cfg.base_dir = base_dir;
  const Cursor root{j, "config"};
  if (!j.is_object()) throw ValidationError("config: expected an object");
  cfg.name = root.value<std::string>("name", "study");

  const auto fam = root.at("family");
  if (fam.j.is_string()) {
    cfg.structure.family = family_from_string(fam.str());
  } else {
    cfg.structure.family = family_from_string(fam.at("name").str());
    if (fam.has("options"))
      for (const auto& [k, v] : fam.at("options").j.items()) cfg.structure.options[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }

  if (root.has("components")) {
    const auto comps = root.at("components");
    for (std::size_t i = 0; i < comps.size(); ++i) cfg.components.push_back(detail::parse_component(comps.at(i)));
  }

  if (root.has("selection")) {
    const auto s = root.at("selection");
    SelectionConfig sc;
    sc.database = cfg.resolve(s.at("database").str());
    sc.criteria = cfg.resolve(s.at("criteria").str());
    sc.min = s.value<std::size_t>("min", 1);
    sc.max = s.value<std::size_t>("max", SIZE_MAX);
    sc.seed = s.value<std::uint64_t>("seed", 0);
    if (s.has("subset_rules")) {
      const auto rules = s.at("subset_rules");
      for (std::size_t i = 0; i < rules.size(); ++i) sc.subset_rules.push_back(detail::parse_subset_rule(rules.at(i)));
    }
    cfg.selection = std::move(sc);
  }

  if (root.has("inference")) {
    const auto s = root.at("inference");
    InferenceConfig ic;
    const auto est = s.at("estimators");
    for (std::size_t i = 0; i < est.size(); ++i) {
      const auto e = est.at(i);
      EstimatorBinding b;
      b.parameter = e.at("parameter").str();
      b.kind = estimator_kind_from_string(e.at("estimator").str());
      if (e.has("keys")) b.keys = e.at("keys").strings();
      else if (e.has("key")) b.keys = {e.at("key").str()};
      b.prefix = e.value<std::string>("prefix", "");
      b.base_dir = cfg.selection ? std::filesystem::path(cfg.selection->database).parent_path().string() : base_dir.string();
      ic.estimators.push_back(std::move(b));
    }
    if (s.has("aggregate")) {
      const auto ag = s.at("aggregate");
      for (std::size_t i = 0; i < ag.size(); ++i) {
        const auto a = ag.at(i);
        AggregateConfig acfg;
        acfg.parameter = a.at("parameter").str();
        acfg.strategy.kind = aggregate_kind_from_string(a.at("strategy").str());
        acfg.strategy.A = a.at("A").uint();
        acfg.strategy.seed = a.value<std::uint64_t>("seed", 0);
        ic.aggregate.push_back(acfg);
      }
    }
    ic.design = mapping_design_from_string(s.value<std::string>("design", "one-to-one"));
    if (s.has("indices"))
      for (std::size_t i = 0; i < s.at("indices").size(); ++i) ic.indices.push_back(s.at("indices").at(i).uint());
    if (s.has("plausibility")) {
      const auto p = s.at("plausibility");
      for (std::size_t i = 0; i < p.size(); ++i) ic.plausibility.push_back(detail::parse_rule(p.at(i)));
    }
    cfg.inference = std::move(ic);
  }

  if (root.has("design")) {
    const auto design = root.at("design");
    const auto blocks = design.at("blocks");
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto b = blocks.at(i);
      DesignBlock blk;
      blk.name = b.value<std::string>("name", "block" + std::to_string(i + 1));
      const auto theta = b.value<std::string>("theta", "inferred");
      if (theta == "inferred") blk.inferred_theta = true;
      else if (theta == "none") blk.inferred_theta = false;
      else throw ValidationError(b.where + ".theta: expected 'inferred' or 'none'");
      if (blk.inferred_theta && !cfg.inference)
        throw ValidationError(b.where + ".theta: 'inferred' needs an inference section");
      const auto rule = b.value<std::string>("rule", "full-cross");
      if (rule == "full-cross") blk.rule = CrossRule::FullCross;
      else if (rule == "paired") blk.rule = CrossRule::Paired;
      else throw ValidationError(b.where + ".rule: expected 'full-cross' or 'paired'");
      if (b.has("grids")) {
        const auto grids = b.at("grids");
        for (std::size_t k = 0; k < grids.size(); ++k) blk.grids.push_back(detail::parse_grid(grids.at(k), cfg));
      }
      cfg.design.push_back(std::move(blk));
    }
  }

  if (root.has("engine")) {
    const auto e = root.at("engine");
    auto& p = cfg.engine;
    p.n_rep = e.at("n_rep").uint();
    p.master_seed = e.value<std::uint64_t>("master_seed", 0);
    p.methods = e.at("methods").strings();
    p.alpha = e.value<double>("alpha", 0.05);
    p.validity_filter = e.value<std::string>("validity_filter", "none");
    if (e.has("min_valid_reps")) p.min_valid_reps = e.at("min_valid_reps").uint();
    p.fisher_B = static_cast<std::int64_t>(e.value<std::uint64_t>("fisher_B", 1000));
    p.mean_floor = e.value<double>("mean_floor", 10.0);
    for (const auto& m : p.methods) {
      const auto& info = stats::find_method(m);
      if (info.family != cfg.structure.family)
        throw ValidationError("config.engine.methods: '" + m + "' does not apply to family " +
                              std::string(to_string(cfg.structure.family)));
    }
  }

  if (root.has("output")) {
    const auto o = root.at("output");
    cfg.out_dir = cfg.resolve(o.value<std::string>("dir", "out"));
    if (o.has("highlight")) cfg.report_highlight = o.at("highlight").strings();
  } else {
    cfg.out_dir = cfg.resolve("out");
  }

  // cross-references: every parameter id the study sets must belong to the family
  const auto required = required_parameters(cfg.structure.family);
  auto known = [&](const std::string& id) { return std::find(required.begin(), required.end(), id) != required.end(); };
  if (cfg.inference) {
    for (const auto& b : cfg.inference->estimators)
      if (!known(b.parameter)) throw ValidationError("config.inference: unknown parameter '" + b.parameter + "'");
    for (const auto& a : cfg.inference->aggregate) {
      if (std::none_of(cfg.inference->estimators.begin(), cfg.inference->estimators.end(),
                       [&](const auto& b) { return b.parameter == a.parameter; }))
        throw ValidationError("config.inference.aggregate: '" + a.parameter + "' has no estimator");
    }
  }
  for (const auto& blk : cfg.design)
    for (const auto& g : blk.grids)
      for (const auto& id : g.ids)
        if (!known(id)) throw ValidationError("config.design." + blk.name + ": unknown parameter '" + id + "'");
  if (!cfg.components.empty()) classify_components(cfg.components, cfg.structure);
  return cfg;
}

inline StudyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  ojson j;
  try {
    j = ojson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return parse_config(j, std::filesystem::absolute(path).parent_path());
}

// ---------------------------------------------------------------------------
// Commands

namespace detail {

inline void write_file(const std::string& path, const std::string& text) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeFailure("cannot write " + path);
  f << text;
  if (!f) throw RuntimeFailure("write failed: " + path);
}

inline std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + v[i];
  return out;
}

}  // namespace detail

struct SelectOutcome {
  SelectionLog log;
  std::vector<DatasetRecord> selected;
  CountBoundsResult::Status status = CountBoundsResult::Status::Ok;
  std::size_t deficit = 0;
  std::string prisma;
};

/// screen -> count bounds -> subset rules. Writes selected.jsonl,
/// selection_log.json and prisma.txt.
inline SelectOutcome cmd_select(const StudyConfig& cfg, std::ostream& log_out = std::cerr) {
  if (!cfg.selection) throw ValidationError("config has no selection section");
  const auto& sc = *cfg.selection;
  const auto db = load_database(sc.database);
  const auto criteria = load_criteria(sc.criteria);
  std::vector<EligibilityCriterion> dataset_level;
  for (const auto& c : criteria)
    if (c.level == CriterionLevel::Dataset) dataset_level.push_back(c);

  auto screened = screen(db, dataset_level);
  SelectOutcome out;
  out.log = screened.log;
  auto bounds = enforce_count_bounds(screened.selected, sc.min, sc.max, sc.seed);
  record_count_bounds(out.log, bounds, sc.seed);
  out.status = bounds.status;
  out.deficit = bounds.deficit;
  out.selected = std::move(bounds.records);
  if (out.status != CountBoundsResult::Status::TooFew && !sc.subset_rules.empty())
    for (auto& r : out.selected) {
      const auto sub = apply_subset_rules(r, sc.subset_rules);
      if (!sub.arms.empty()) r.metadata["selected_arms"] = detail::join(sub.arms, ',');
      if (sub.outcome) r.metadata["selected_outcome"] = *sub.outcome;
    }
  out.prisma = prisma_text(out.log, criteria);

  std::ostringstream sel;
  write_records_jsonl(sel, out.selected);
  detail::write_file(cfg.out_path("selected.jsonl"), sel.str());
  auto lj = log_to_json(out.log);
  lj["status"] = out.status == CountBoundsResult::Status::TooFew ? "too-few"
                 : out.status == CountBoundsResult::Status::Downselected ? "downselected" : "ok";
  lj["deficit"] = out.deficit;
  detail::write_file(cfg.out_path("selection_log.json"), lj.dump(2) + "\n");
  detail::write_file(cfg.out_path("prisma.txt"), out.prisma);

  log_out << out.prisma;
  if (out.status == CountBoundsResult::Status::TooFew)
    log_out << "too few datasets: " << out.selected.size() << " selected, minimum " << sc.min << ", deficit "
            << out.deficit << "; expand the database or relax the criteria\n";
  return out;
}

struct InferOutcome {
  std::vector<InferredValueSet> value_sets;
  ConsideredParameterSet considered;
  std::vector<Violation> violations;
};

inline InferOutcome run_inference(const InferenceConfig& ic, const std::vector<DatasetRecord>& records) {
  InferOutcome out;
  auto direct = direct_infer(records, ic.estimators);
  for (auto& s : direct) {
    auto it = std::find_if(ic.aggregate.begin(), ic.aggregate.end(), [&](const auto& a) { return a.parameter == s.parameter; });
    if (it != ic.aggregate.end()) {
      std::vector<InferredValueSet> base{s};
      out.value_sets.push_back(aggregate_infer(base, it->strategy));
    } else {
      out.value_sets.push_back(std::move(s));
    }
  }
  out.considered = map_to_considered_vectors(out.value_sets, ic.design, ic.indices);
  out.violations = plausibility_check(out.considered, ic.plausibility);
  return out;
}

/// Reads selected.jsonl (or `input`) and writes considered.json.
inline InferOutcome cmd_infer(const StudyConfig& cfg, const std::string& input = {}, std::ostream& log_out = std::cerr) {
  if (!cfg.inference) throw ValidationError("config has no inference section");
  const auto path = input.empty() ? cfg.out_path("selected.jsonl") : input;
  const auto records = load_database_jsonl(path);
  auto out = run_inference(*cfg.inference, records);

  ojson j;
  ojson sets = ojson::array();
  for (const auto& s : out.value_sets) sets.push_back(io::to_json(s));
  j["value_sets"] = sets;
  j["considered"] = io::to_json(out.considered);
  ojson viol = ojson::array();
  for (const auto& v : out.violations)
    viol.push_back({{"vector", v.vector_index}, {"rule", v.rule_id}, {"message", v.message}});
  j["plausibility"] = viol;
  detail::write_file(cfg.out_path("considered.json"), j.dump(2) + "\n");

  for (const auto& s : out.value_sets)
    for (const auto& w : s.warnings) log_out << "warning: " << w << '\n';
  log_out << "considered parameter vectors: " << out.considered.size() << " (" << to_string(out.considered.design)
          << "), plausibility violations: " << out.violations.size() << '\n';
  return out;
}

inline std::vector<DGMInstance> build_dgms(const StudyConfig& cfg, const ConsideredParameterSet* considered) {
  std::vector<DGMInstance> out;
  for (const auto& blk : cfg.design) {
    std::vector<ParameterVector> theta;
    if (blk.inferred_theta) {
      if (!considered) throw ValidationError("design block '" + blk.name + "' needs inferred parameter vectors");
      theta = considered->vectors;
    } else {
      theta.emplace_back();
    }
    auto dgms = cross_design(theta, blk.grids, blk.rule, cfg.structure);
    for (auto& d : dgms) {
      d.validate();
      out.push_back(std::move(d));
    }
  }
  std::set<std::string> labels;
  for (const auto& d : out)
    if (!labels.insert(d.label).second) throw ValidationError("duplicate DGM label '" + d.label + "'");
  return out;
}

/// Crosses the considered set with the design blocks; writes dgms.jsonl.
inline std::vector<DGMInstance> cmd_plan(const StudyConfig& cfg, const std::string& input = {},
                                         std::ostream& log_out = std::cerr) {
  if (cfg.design.empty()) throw ValidationError("config has no design blocks");
  std::optional<ConsideredParameterSet> considered;
  const bool need = std::any_of(cfg.design.begin(), cfg.design.end(), [](const auto& b) { return b.inferred_theta; });
  if (need) {
    const auto path = input.empty() ? cfg.out_path("considered.json") : input;
    const auto j = ojson::parse(io::read_text(path));
    considered = io::considered_from_json(j.at("considered"));
  }
  auto dgms = build_dgms(cfg, considered ? &*considered : nullptr);
  std::filesystem::create_directories(cfg.out_dir);
  io::write_dgms_jsonl(cfg.out_path("dgms.jsonl"), dgms);
  log_out << "DGMs: " << dgms.size() << '\n';
  return dgms;
}

struct RunOutcome {
  StudyResult result;
  std::vector<SummaryRecord> summary;
  ExportPaths paths;
};

inline RunOutcome cmd_run(const StudyConfig& cfg, unsigned workers, const std::string& input = {},
                          std::ostream& log_out = std::cerr) {
  const auto path = input.empty() ? cfg.out_path("dgms.jsonl") : input;
  StudyPlan plan = cfg.engine;
  plan.dgms = io::read_dgms_jsonl(path);
  plan.validate();
  RunOptions opt;
  opt.workers = workers;
  std::size_t finished = 0;
  opt.on_dgm_done = [&](std::size_t, const std::string& label) {
    log_out << "[" << ++finished << "/" << plan.dgms.size() << "] " << label << '\n';
  };
  RunOutcome out;
  out.result = run_study(plan, opt);
  out.summary = summarize(out.result, plan);
  out.paths = export_results(cfg.out_dir, out.summary, out.result, plan);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", out.result.seconds);
  log_out << "wall time: " << buf << " s\n";
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct ReportRow {
  std::string dgm_label;
  std::string source;
  std::string specification;
  std::map<std::string, std::string> keys;  // key=value label segments
  std::string method;
  std::string measure;
  double estimate = 0;
  std::string covariate_name;
  std::string covariate_value;
  bool highlight = false;
};

struct ReportOutcome {
  std::string absolute_csv;
  std::string difference_csv;
  std::size_t rows = 0;
};

/// Tidy plot data from a summary CSV. Excluded rows are left out. When a
/// dgms.jsonl sits next to the summary, it supplies the specification type.
inline ReportOutcome make_report(const std::string& summary_path, const std::vector<std::string>& highlight,
                                 const std::string& dgms_path = {}) {
  const auto t = csv::read_file(summary_path);
  for (const auto& c : summary_columns()) (void)t.require_column(c);
  const auto ci = [&](const char* c) { return t.require_column(c); };

  std::map<std::string, std::string> spec;
  if (!dgms_path.empty() && std::filesystem::exists(dgms_path))
    for (const auto& d : io::read_dgms_jsonl(dgms_path))
      spec[d.label] = d.theta.empty() ? "researcher" : "real-data-based";

  std::vector<ReportRow> rows;
  std::set<std::string> key_names;
  for (const auto& r : t.rows) {
    if (r[ci("excluded")] == "true" || r[ci("estimate")].empty()) continue;
    ReportRow row;
    row.dgm_label = r[ci("dgm_label")];
    std::stringstream ss(row.dgm_label);
    std::string seg;
    bool first = true;
    while (std::getline(ss, seg, '|')) {
      std::stringstream parts(seg);
      std::string kv;
      bool any = false;
      while (std::getline(parts, kv, ',')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        row.keys[kv.substr(0, eq)] = kv.substr(eq + 1);
        key_names.insert(kv.substr(0, eq));
        any = true;
      }
      if (first && !any) row.source = seg;
      first = false;
    }
    auto it = spec.find(row.dgm_label);
    row.specification = it == spec.end() ? "" : it->second;
    row.method = r[ci("method")];
    row.measure = r[ci("measure")];
    row.estimate = std::stod(r[ci("estimate")]);
    row.covariate_name = r[ci("covariate_name")];
    row.covariate_value = r[ci("covariate_value")];
    row.highlight = std::find(highlight.begin(), highlight.end(), row.source) != highlight.end();
    rows.push_back(std::move(row));
  }

  std::map<std::string, double> best;
  for (const auto& r : rows) {
    auto [it, fresh] = best.emplace(r.dgm_label, r.estimate);
    if (!fresh) it->second = std::max(it->second, r.estimate);
  }

  std::vector<std::string> header{"dgm_label", "source", "specification"};
  for (const auto& k : key_names) header.push_back(k);
  for (const char* c : {"method", "measure", "covariate_name", "covariate_value", "highlight"}) header.emplace_back(c);
  auto head_abs = header;
  head_abs.emplace_back("estimate");
  auto head_diff = header;
  head_diff.emplace_back("difference_to_best");

  std::ostringstream a, d;
  csv::write_row(a, head_abs);
  csv::write_row(d, head_diff);
  for (const auto& r : rows) {
    std::vector<std::string> cells{r.dgm_label, r.source, r.specification};
    for (const auto& k : key_names) {
      auto it = r.keys.find(k);
      cells.push_back(it == r.keys.end() ? "" : it->second);
    }
    cells.insert(cells.end(), {r.method, r.measure, r.covariate_name, r.covariate_value, r.highlight ? "true" : "false"});
    auto ca = cells;
    ca.push_back(fixed(r.estimate));
    csv::write_row(a, ca);
    if (r.measure != "mean") {
      cells.push_back(fixed(r.estimate - best[r.dgm_label]));
      csv::write_row(d, cells);
    }
  }
  return {a.str(), d.str(), rows.size()};
}

inline ReportOutcome cmd_report(const StudyConfig& cfg, const std::string& input = {}, std::ostream& log_out = std::cerr) {
  const auto path = input.empty() ? cfg.out_path("summary.csv") : input;
  const auto dgms = (std::filesystem::path(path).parent_path() / "dgms.jsonl").string();
  auto rep = make_report(path, cfg.report_highlight, dgms);
  detail::write_file(cfg.out_path("report_absolute.csv"), rep.absolute_csv);
  detail::write_file(cfg.out_path("report_difference.csv"), rep.difference_csv);
  log_out << "report rows: " << rep.rows << '\n';
  return rep;
}

}  // namespace rdgm
