#pragma once

// Systematic dataset selection: eligibility screening with per-criterion
// attrition, count-bound enforcement and subset-level rules.
//
// Screening operates on structured metadata. A manual eligibility assessment
// is encoded as boolean/count fields on each record; criteria are declarative
// comparisons over those fields.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rdgm/error.hpp"
#include "rdgm/io/csv.hpp"
#include "rdgm/rng.hpp"

namespace rdgm {

/// Ordered label -> count table (arm sizes, outcome priorities). Order is the
/// declared order and is used for tie-breaking.
using CountTable = std::vector<std::pair<std::string, double>>;
using MetaValue = std::variant<bool, double, std::string, CountTable>;

struct DatasetRecord {
  std::string id;
  std::string source;
  std::map<std::string, MetaValue> metadata;
  std::optional<std::string> payload;

  [[nodiscard]] const MetaValue* get(const std::string& key) const {
    auto it = metadata.find(key);
    return it == metadata.end() ? nullptr : &it->second;
  }

  [[nodiscard]] double number(const std::string& key) const {
    const auto* v = get(key);
    if (!v) throw ValidationError("record '" + id + "': missing metadata key '" + key + "'");
    if (const auto* d = std::get_if<double>(v)) return *d;
    if (const auto* b = std::get_if<bool>(v)) return *b ? 1.0 : 0.0;
    throw ValidationError("record '" + id + "': metadata '" + key + "' is not numeric");
  }

  [[nodiscard]] const std::string& text(const std::string& key) const {
    const auto* v = get(key);
    if (!v) throw ValidationError("record '" + id + "': missing metadata key '" + key + "'");
    if (const auto* s = std::get_if<std::string>(v)) return *s;
    throw ValidationError("record '" + id + "': metadata '" + key + "' is not a string");
  }

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

enum class CriterionLevel { Dataset, Subset };
enum class Requirement { R1Accessibility, R2Domain, R3Information };
enum class Phase { Inclusion, Exclusion };
enum class Op { Eq, Ne, Lt, Le, Gt, Ge, In, Has };

struct EligibilityCriterion {
  std::string id;
  CriterionLevel level = CriterionLevel::Dataset;
  Requirement requirement = Requirement::R2Domain;
  Phase phase = Phase::Inclusion;
  std::string key;
  Op op = Op::Eq;
  std::vector<MetaValue> values;  // one value, or the candidate list for `in`
  std::string note;
  std::string group;  // reporting stage, e.g. "trial exclusion"
};

// ---------------------------------------------------------------------------
// Predicate evaluation

namespace detail {

inline std::optional<double> as_number(const MetaValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  return std::nullopt;
}

inline bool meta_equal(const MetaValue& a, const MetaValue& b) {
  if (auto x = as_number(a), y = as_number(b); x && y) return *x == *y;
  const auto* s = std::get_if<std::string>(&a);
  const auto* t = std::get_if<std::string>(&b);
  return s && t && *s == *t;
}

}  // namespace detail

/// nullopt when the record cannot be assessed (missing key or a value of the
/// wrong kind for an ordering comparison).
inline std::optional<bool> evaluate(const EligibilityCriterion& c, const DatasetRecord& r) {
  const MetaValue* v = r.get(c.key);
  if (!v) return std::nullopt;
  if (c.values.empty()) throw ValidationError("criterion '" + c.id + "' has no comparison value");
  const MetaValue& ref = c.values.front();
  switch (c.op) {
    case Op::Eq: return detail::meta_equal(*v, ref);
    case Op::Ne: return !detail::meta_equal(*v, ref);
    case Op::Lt:
    case Op::Le:
    case Op::Gt:
    case Op::Ge: {
      auto x = detail::as_number(*v);
      auto y = detail::as_number(ref);
      if (!y) throw ValidationError("criterion '" + c.id + "': ordering comparison needs a number");
      if (!x) return std::nullopt;
      if (c.op == Op::Lt) return *x < *y;
      if (c.op == Op::Le) return *x <= *y;
      if (c.op == Op::Gt) return *x > *y;
      return *x >= *y;
    }
    case Op::In:
      return std::any_of(c.values.begin(), c.values.end(),
                         [&](const MetaValue& m) { return detail::meta_equal(*v, m); });
    case Op::Has: {
      const auto* label = std::get_if<std::string>(&ref);
      if (!label) throw ValidationError("criterion '" + c.id + "': 'has' needs a string value");
      if (const auto* t = std::get_if<CountTable>(v))
        return std::any_of(t->begin(), t->end(),
                           [&](const auto& e) { return e.first == *label && e.second > 0; });
      if (const auto* s = std::get_if<std::string>(v)) return s->find(*label) != std::string::npos;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Selection log

struct SelectionStage {
  std::string criterion_id;
  std::string group;
  std::size_t assessed = 0;
  std::size_t removed = 0;
  std::size_t unassessable = 0;  // also counted in the dedicated "unassessable" stage
};

inline constexpr const char* kUnassessableStage = "unassessable";

struct SelectionLog {
  std::size_t initial = 0;
  std::vector<SelectionStage> stages;
  std::vector<std::string> final_ids;
  std::optional<std::uint64_t> seed;

  [[nodiscard]] std::size_t total_removed() const {
    std::size_t s = 0;
    for (const auto& st : stages) s += st.removed;
    return s;
  }
  [[nodiscard]] bool balanced() const { return initial - total_removed() == final_ids.size(); }

  /// Records still in the pool once every stage up to and including the last
  /// one tagged `group` has run. Unassessable removals are charged to the
  /// stage where they occurred.
  [[nodiscard]] std::size_t remaining_after_group(const std::string& group) const {
    std::size_t remaining = initial;
    std::size_t after = initial;
    for (const auto& st : stages) {
      if (st.criterion_id == kUnassessableStage) continue;
      remaining -= st.removed + st.unassessable;
      if (st.group == group) after = remaining;
    }
    return after;
  }
};

struct ScreenResult {
  std::vector<DatasetRecord> selected;
  SelectionLog log;
};

/// Union of metadata keys across records.
inline std::set<std::string> declared_keys(const std::vector<DatasetRecord>& database) {
  std::set<std::string> keys;
  for (const auto& r : database)
    for (const auto& [k, _] : r.metadata) keys.insert(k);
  return keys;
}

inline ScreenResult screen(const std::vector<DatasetRecord>& database,
                           const std::vector<EligibilityCriterion>& criteria) {
  std::set<std::string> ids;
  for (const auto& r : database)
    if (!ids.insert(r.id).second) throw ValidationError("duplicate record id '" + r.id + "'");
  const auto keys = declared_keys(database);
  for (const auto& c : criteria) {
    if (c.level != CriterionLevel::Dataset)
      throw ValidationError("criterion '" + c.id + "' is subset-level; screen takes dataset-level criteria");
    if (!keys.count(c.key))
      throw ValidationError("criterion '" + c.id + "' references undeclared metadata key '" + c.key + "'");
  }

  ScreenResult res;
  res.log.initial = database.size();
  std::vector<const DatasetRecord*> pool;
  for (const auto& r : database) pool.push_back(&r);

  std::size_t unassessable_total = 0;
  for (const auto& c : criteria) {
    SelectionStage st{c.id, c.group, pool.size(), 0, 0};
    std::vector<const DatasetRecord*> next;
    next.reserve(pool.size());
    for (const auto* r : pool) {
      auto outcome = evaluate(c, *r);
      if (!outcome) {
        ++st.unassessable;
        continue;
      }
      const bool keep = c.phase == Phase::Inclusion ? *outcome : !*outcome;
      if (keep)
        next.push_back(r);
      else
        ++st.removed;
    }
    unassessable_total += st.unassessable;
    res.log.stages.push_back(st);
    pool = std::move(next);
  }
  if (unassessable_total > 0)
    res.log.stages.push_back({kUnassessableStage, "", 0, unassessable_total, 0});

  for (const auto* r : pool) {
    res.selected.push_back(*r);
    res.log.final_ids.push_back(r->id);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Count bounds

struct CountBoundsResult {
  enum class Status { Ok, TooFew, Downselected };
  Status status = Status::Ok;
  std::vector<DatasetRecord> records;
  std::size_t deficit = 0;
};

/// Below `min`: signal only, never fabricate. Above `max`: seeded uniform
/// sample without replacement, returned in original order.
inline CountBoundsResult enforce_count_bounds(const std::vector<DatasetRecord>& selected, std::size_t min,
                                              std::size_t max, std::uint64_t seed) {
  if (min < 1) throw ValidationError("count bounds: min must be at least 1");
  if (min > max) throw ValidationError("count bounds: min > max");
  CountBoundsResult out;
  if (selected.size() < min) {
    out.status = CountBoundsResult::Status::TooFew;
    out.deficit = min - selected.size();
    out.records = selected;
    return out;
  }
  if (selected.size() <= max) {
    out.records = selected;
    return out;
  }
  auto rng = make_rng(seed, 0x646f776e73656cULL);
  std::vector<std::size_t> idx(selected.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < max; ++i) {
    auto j = i + static_cast<std::size_t>(uniform_index(rng, idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(max);
  std::sort(idx.begin(), idx.end());
  out.status = CountBoundsResult::Status::Downselected;
  for (auto i : idx) out.records.push_back(selected[i]);
  return out;
}

/// Appends a down-selection stage so the log still balances.
inline void record_count_bounds(SelectionLog& log, const CountBoundsResult& res, std::uint64_t seed) {
  if (res.status != CountBoundsResult::Status::Downselected) return;
  log.stages.push_back({"count-bounds", "down-selection", log.final_ids.size(),
                        log.final_ids.size() - res.records.size(), 0});
  log.seed = seed;
  log.final_ids.clear();
  for (const auto& r : res.records) log.final_ids.push_back(r.id);
}

// ---------------------------------------------------------------------------
// Subset rules

struct SubsetRule {
  enum class Kind {
    LargestArms,      // keep `count` arms with the largest sizes
    OutcomePriority,  // rank outcomes by ascending priority value
    OutcomeLargestN,  // rank outcomes by descending sample size
    RequireComplete,  // drop outcomes whose completeness flag is 0
  };
  Kind kind = Kind::LargestArms;
  std::string key;  // metadata count table the rule reads
  std::size_t count = 2;

  static SubsetRule largest_arms(std::size_t n = 2, std::string key = "arms") {
    return {Kind::LargestArms, std::move(key), n};
  }
  static SubsetRule outcome_priority(std::string key = "outcome_priority") {
    return {Kind::OutcomePriority, std::move(key), 0};
  }
  static SubsetRule outcome_largest_n(std::string key = "outcome_n") {
    return {Kind::OutcomeLargestN, std::move(key), 0};
  }
  static SubsetRule require_complete(std::string key = "outcome_complete") {
    return {Kind::RequireComplete, std::move(key), 0};
  }
};

struct SubsetDescriptor {
  std::string record_id;
  std::vector<std::string> arms;
  std::optional<std::string> outcome;

  friend bool operator==(const SubsetDescriptor&, const SubsetDescriptor&) = default;
};

namespace detail {

inline const CountTable& require_table(const DatasetRecord& r, const std::string& key) {
  const auto* v = r.get(key);
  if (!v) throw ValidationError("record '" + r.id + "': subset rule needs metadata key '" + key + "'");
  const auto* t = std::get_if<CountTable>(v);
  if (!t) throw ValidationError("record '" + r.id + "': metadata '" + key + "' is not a count table");
  return *t;
}

inline double table_value(const CountTable& t, const std::string& label, double fallback) {
  for (const auto& [k, v] : t)
    if (k == label) return v;
  return fallback;
}

}  // namespace detail

/// Arm rules keep the largest arms (ties by declared order). Outcome rules
/// combine lexicographically: ranking rules in chain order, filters applied
/// regardless of position; the best-ranked surviving outcome wins.
inline SubsetDescriptor apply_subset_rules(const DatasetRecord& record, const std::vector<SubsetRule>& rules) {
  SubsetDescriptor out{record.id, {}, std::nullopt};

  bool arm_rule = false;
  for (const auto& rule : rules) {
    if (rule.kind != SubsetRule::Kind::LargestArms) continue;
    arm_rule = true;
    const auto& arms = detail::require_table(record, rule.key);
    if (arms.size() < rule.count)
      throw ValidationError("record '" + record.id + "': only " + std::to_string(arms.size()) +
                            " arms, need " + std::to_string(rule.count));
    std::vector<std::size_t> order(arms.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return arms[a].second > arms[b].second; });
    order.resize(rule.count);
    std::sort(order.begin(), order.end());
    out.arms.clear();
    for (auto i : order) out.arms.push_back(arms[i].first);
  }
  if (!arm_rule) {
    if (const auto* v = record.get("arms"); v && std::holds_alternative<CountTable>(*v))
      for (const auto& [k, _] : std::get<CountTable>(*v)) out.arms.push_back(k);
  }

  std::vector<const SubsetRule*> ranking;
  std::vector<const SubsetRule*> filters;
  std::vector<std::string> candidates;
  for (const auto& rule : rules) {
    if (rule.kind == SubsetRule::Kind::LargestArms) continue;
    const auto& t = detail::require_table(record, rule.key);
    if (candidates.empty())
      for (const auto& [k, _] : t) candidates.push_back(k);
    (rule.kind == SubsetRule::Kind::RequireComplete ? filters : ranking).push_back(&rule);
  }
  if (ranking.empty() && filters.empty()) return out;

  std::vector<std::string> eligible;
  for (const auto& c : candidates) {
    bool ok = true;
    for (const auto* f : filters)
      if (detail::table_value(detail::require_table(record, f->key), c, 0.0) == 0.0) ok = false;
    if (ok) eligible.push_back(c);
  }
  if (eligible.empty()) throw ValidationError("record '" + record.id + "': no outcome satisfies the subset rules");

  auto key_of = [&](const std::string& c) {
    std::vector<double> k;
    for (const auto* r : ranking) {
      const auto& t = detail::require_table(record, r->key);
      if (r->kind == SubsetRule::Kind::OutcomePriority)
        k.push_back(detail::table_value(t, c, HUGE_VAL));
      else
        k.push_back(-detail::table_value(t, c, -HUGE_VAL));
    }
    return k;
  };
  std::stable_sort(eligible.begin(), eligible.end(),
                   [&](const std::string& a, const std::string& b) { return key_of(a) < key_of(b); });
  out.outcome = eligible.front();
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion and export

inline std::string_view to_string(Requirement r) {
  switch (r) {
    case Requirement::R1Accessibility: return "R1-accessibility";
    case Requirement::R2Domain: return "R2-domain";
    case Requirement::R3Information: return "R3-information";
  }
  return "?";
}

namespace detail {

inline MetaValue meta_from_json(const nlohmann::json& j, const std::string& where) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_object()) {
    CountTable t;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!it.value().is_number()) throw ValidationError(where + ": count table entries must be numbers");
      t.emplace_back(it.key(), it.value().get<double>());
    }
    return t;
  }
  if (j.is_array()) {  // [[label, count], ...] keeps declared order
    CountTable t;
    for (const auto& e : j) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_number())
        throw ValidationError(where + ": count table must be [[label, count], ...]");
      t.emplace_back(e[0].get<std::string>(), e[1].get<double>());
    }
    return t;
  }
  throw ValidationError(where + ": unsupported metadata value");
}

inline nlohmann::ordered_json meta_to_json(const MetaValue& v) {
  return std::visit(
      [](const auto& x) -> nlohmann::ordered_json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, CountTable>) {
          auto arr = nlohmann::ordered_json::array();
          for (const auto& [k, c] : x) arr.push_back({k, c});
          return arr;
        } else {
          return x;
        }
      },
      v);
}

inline MetaValue meta_from_cell(const std::string& cell) {
  if (cell == "true" || cell == "TRUE") return true;
  if (cell == "false" || cell == "FALSE") return false;
  if (!cell.empty()) {
    char* end = nullptr;
    double d = std::strtod(cell.c_str(), &end);
    if (end && *end == '\0') return d;
  }
  return cell;
}

template <class E>
E enum_from(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, v] : table)
    if (s == name) return v;
  throw ValidationError(std::string("unknown ") + what + " '" + s + "'");
}

}  // namespace detail

inline DatasetRecord record_from_json(const nlohmann::json& j) {
  DatasetRecord r;
  if (!j.contains("id") || !j["id"].is_string()) throw ValidationError("database record without string 'id'");
  r.id = j["id"].get<std::string>();
  r.source = j.value("source", std::string{});
  if (j.contains("payload") && j["payload"].is_string()) r.payload = j["payload"].get<std::string>();
  if (j.contains("metadata")) {
    for (auto it = j["metadata"].begin(); it != j["metadata"].end(); ++it)
      r.metadata[it.key()] = detail::meta_from_json(it.value(), "record '" + r.id + "' key '" + it.key() + "'");
  }
  return r;
}

inline nlohmann::ordered_json record_to_json(const DatasetRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["source"] = r.source;
  auto meta = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.metadata) meta[k] = detail::meta_to_json(v);
  j["metadata"] = std::move(meta);
  if (r.payload) j["payload"] = *r.payload;
  return j;
}

inline std::vector<DatasetRecord> load_database_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open database '" + path + "'");
  std::vector<DatasetRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

/// CSV database: `dataset_id` (or `id`) column gives the id, `publication`
/// (or `source`) the locator; every other column becomes metadata.
inline std::vector<DatasetRecord> load_database_csv(const std::string& path) {
  auto t = csv::read_file(path);
  auto id_col = t.column("dataset_id");
  if (id_col < 0) id_col = t.column("id");
  if (id_col < 0) throw ValidationError(path + ": needs a 'dataset_id' or 'id' column");
  auto src_col = t.column("publication");
  if (src_col < 0) src_col = t.column("source");
  std::vector<DatasetRecord> out;
  for (const auto& row : t.rows) {
    DatasetRecord r;
    r.id = row[static_cast<std::size_t>(id_col)];
    if (src_col >= 0) r.source = row[static_cast<std::size_t>(src_col)];
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (static_cast<std::ptrdiff_t>(i) == id_col || static_cast<std::ptrdiff_t>(i) == src_col) continue;
      if (row[i].empty()) continue;  // empty cell = not reported
      r.metadata[t.header[i]] = detail::meta_from_cell(row[i]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<DatasetRecord> load_database(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return load_database_csv(path);
  return load_database_jsonl(path);
}

inline void write_records_jsonl(std::ostream& out, const std::vector<DatasetRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

inline EligibilityCriterion criterion_from_json(const nlohmann::json& j) {
  EligibilityCriterion c;
  try {
    c.id = j.at("id").get<std::string>();
    c.level = detail::enum_from<CriterionLevel>(j.value("level", std::string("dataset")),
                                                {{"dataset", CriterionLevel::Dataset}, {"subset", CriterionLevel::Subset}},
                                                "criterion level");
    c.requirement = detail::enum_from<Requirement>(j.at("requirement").get<std::string>(),
                                                   {{"R1", Requirement::R1Accessibility},
                                                    {"R1-accessibility", Requirement::R1Accessibility},
                                                    {"R2", Requirement::R2Domain},
                                                    {"R2-domain", Requirement::R2Domain},
                                                    {"R3", Requirement::R3Information},
                                                    {"R3-information", Requirement::R3Information}},
                                                   "requirement");
    c.phase = detail::enum_from<Phase>(j.at("phase").get<std::string>(),
                                       {{"inclusion", Phase::Inclusion}, {"exclusion", Phase::Exclusion}}, "phase");
    c.key = j.at("key").get<std::string>();
    c.op = detail::enum_from<Op>(j.at("op").get<std::string>(),
                                 {{"=", Op::Eq}, {"==", Op::Eq}, {"!=", Op::Ne}, {"≠", Op::Ne}, {"<", Op::Lt},
                                  {"<=", Op::Le}, {"≤", Op::Le}, {">", Op::Gt}, {">=", Op::Ge}, {"≥", Op::Ge},
                                  {"in", Op::In}, {"has", Op::Has}},
                                 "operator");
    const auto& v = j.at("value");
    if (c.op == Op::In) {
      if (!v.is_array()) throw ValidationError("criterion '" + c.id + "': 'in' needs an array value");
      for (const auto& e : v) c.values.push_back(detail::meta_from_json(e, "criterion '" + c.id + "'"));
    } else {
      c.values.push_back(detail::meta_from_json(v, "criterion '" + c.id + "'"));
    }
    c.note = j.value("note", std::string{});
    c.group = j.value("group", c.phase == Phase::Inclusion ? std::string("inclusion") : std::string("exclusion"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed criterion: " + std::string(e.what()));
  }
  return c;
}

inline std::vector<EligibilityCriterion> load_criteria(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open criteria file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  if (!j.is_array()) throw ValidationError(path + ": criteria file must be a JSON array");
  std::vector<EligibilityCriterion> out;
  for (const auto& e : j) out.push_back(criterion_from_json(e));
  return out;
}

inline nlohmann::ordered_json log_to_json(const SelectionLog& log) {
  nlohmann::ordered_json j;
  j["initial"] = log.initial;
  auto stages = nlohmann::ordered_json::array();
  for (const auto& s : log.stages)
    stages.push_back({{"criterion", s.criterion_id},
                      {"group", s.group},
                      {"assessed", s.assessed},
                      {"removed", s.removed},
                      {"unassessable", s.unassessable}});
  j["stages"] = std::move(stages);
  j["final_count"] = log.final_ids.size();
  j["final_ids"] = log.final_ids;
  j["seed"] = log.seed ? nlohmann::ordered_json(*log.seed) : nlohmann::ordered_json(nullptr);
  return j;
}

/// Plain-text flow summary in the style of a PRISMA diagram.
inline std::string prisma_text(const SelectionLog& log, const std::vector<EligibilityCriterion>& criteria) {
  std::ostringstream out;
  out << "Records identified for screening: " << log.initial << '\n';
  std::size_t remaining = log.initial;
  for (std::size_t i = 0; i < log.stages.size(); ++i) {
    const auto& s = log.stages[i];
    if (s.criterion_id == kUnassessableStage) {
      out << "  (of which unassessable, missing information: " << s.removed << ")\n";
      continue;
    }
    std::string note;
    for (const auto& c : criteria)
      if (c.id == s.criterion_id) note = " [" + std::string(to_string(c.requirement)) + "] " + c.note;
    out << "  - excluded by " << s.criterion_id << note << ": " << s.removed;
    if (s.unassessable) out << " (+" << s.unassessable << " unassessable)";
    out << '\n';
    remaining -= s.removed + s.unassessable;
    const bool group_end = i + 1 == log.stages.size() || log.stages[i + 1].group != s.group;
    if (group_end && !s.group.empty()) out << "Remaining after " << s.group << ": " << remaining << '\n';
  }
  out << "Records included: " << log.final_ids.size() << '\n';
  return out.str();
}

}  // namespace rdgm
