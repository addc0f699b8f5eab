#pragma once

// JSON forms of DGM instances and inference results.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rdgm/core.hpp"
#include "rdgm/error.hpp"
#include "rdgm/inference.hpp"

namespace rdgm::io {

using ojson = nlohmann::ordered_json;

inline ojson to_json(const ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* t = std::get_if<std::vector<double>>(&v)) return *t;
  return std::get<std::string>(v);
}

inline ParamValue param_from_json(const ojson& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_array()) {
    std::vector<double> t;
    for (const auto& e : j) {
      if (!e.is_number()) throw ValidationError(where + ": tuple entries must be numbers");
      t.push_back(e.get<double>());
    }
    return t;
  }
  throw ValidationError(where + ": parameter value must be a number, array or string");
}

inline ojson to_json(const ParameterVector& v) {
  ojson values = ojson::object();
  for (const auto& [k, val] : v.entries()) values[k] = to_json(val);
  ojson prov = {{"kind", std::string(to_string(v.provenance().kind))}, {"source", v.provenance().source}};
  return {{"values", values}, {"provenance", prov}};
}

inline ParameterVector vector_from_json(const ojson& j, const std::string& where) {
  std::vector<ParameterVector::Entry> e;
  for (const auto& [k, val] : j.at("values").items()) e.emplace_back(k, param_from_json(val, where + "." + k));
  Provenance p;
  if (j.contains("provenance")) {
    p.kind = provenance_from_string(j["provenance"].value("kind", std::string("researcher")));
    p.source = j["provenance"].value("source", std::string{});
  }
  return ParameterVector(std::move(e), std::move(p));
}

inline ojson to_json(const ModelStructureConfig& s) {
  ojson o = {{"family", std::string(to_string(s.family))}};
  ojson opts = ojson::object();
  for (const auto& [k, v] : s.options) opts[k] = v;
  o["options"] = opts;
  return o;
}

inline ModelStructureConfig structure_from_json(const ojson& j) {
  ModelStructureConfig s;
  s.family = family_from_string(j.at("family").get<std::string>());
  if (j.contains("options"))
    for (const auto& [k, v] : j["options"].items()) s.options[k] = v.is_string() ? v.get<std::string>() : v.dump();
  return s;
}

inline ojson to_json(const DGMInstance& d) {
  return {{"label", d.label}, {"structure", to_json(d.structure)}, {"lambda", to_json(d.lambda)}, {"theta", to_json(d.theta)}};
}

inline DGMInstance dgm_from_json(const ojson& j) {
  try {
    DGMInstance d;
    d.label = j.at("label").get<std::string>();
    d.structure = structure_from_json(j.at("structure"));
    d.lambda = vector_from_json(j.at("lambda"), d.label + ".lambda");
    d.theta = vector_from_json(j.at("theta"), d.label + ".theta");
    d.validate();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed DGM record: " + std::string(e.what()));
  }
}

inline void write_dgms_jsonl(const std::string& path, const std::vector<DGMInstance>& dgms) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path);
  for (const auto& d : dgms) out << to_json(d).dump() << '\n';
  if (!out) throw RuntimeFailure("write failed: " + path);
}

inline std::vector<DGMInstance> read_dgms_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<DGMInstance> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(dgm_from_json(ojson::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline ojson to_json(const InferredValueSet& s) {
  ojson o = {{"parameter", s.parameter}, {"mode", std::string(to_string(s.mode))}};
  ojson vals = ojson::array();
  for (const auto& v : s.values) vals.push_back(to_json(v));
  o["values"] = vals;
  if (s.mode == InferenceMode::Direct) {
    o["dataset_ids"] = s.dataset_ids;
  } else {
    o["strategy"] = s.strategy;
    o["A"] = s.A();
    if (s.seed) o["seed"] = *s.seed;
  }
  if (!s.warnings.empty()) o["warnings"] = s.warnings;
  return o;
}

inline InferredValueSet value_set_from_json(const ojson& j) {
  InferredValueSet s;
  s.parameter = j.at("parameter").get<std::string>();
  s.mode = j.at("mode").get<std::string>() == "direct" ? InferenceMode::Direct : InferenceMode::Aggregated;
  for (const auto& v : j.at("values")) s.values.push_back(param_from_json(v, s.parameter));
  if (j.contains("dataset_ids")) s.dataset_ids = j["dataset_ids"].get<std::vector<std::string>>();
  s.strategy = j.value("strategy", std::string{});
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("warnings")) s.warnings = j["warnings"].get<std::vector<std::string>>();
  s.validate();
  return s;
}

inline ojson to_json(const ConsideredParameterSet& c) {
  ojson vecs = ojson::array();
  for (std::size_t i = 0; i < c.vectors.size(); ++i) {
    auto v = to_json(c.vectors[i]);
    v["multiplicity"] = c.multiplicity[i];
    vecs.push_back(std::move(v));
  }
  return {{"design", std::string(to_string(c.design))}, {"L", c.vectors.size()}, {"vectors", vecs}};
}

inline ConsideredParameterSet considered_from_json(const ojson& j) {
  ConsideredParameterSet c;
  c.design = mapping_design_from_string(j.at("design").get<std::string>());
  for (const auto& v : j.at("vectors")) {
    c.vectors.push_back(vector_from_json(v, "considered vector"));
    c.multiplicity.push_back(v.value("multiplicity", std::size_t{1}));
  }
  return c;
}

/// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace rdgm::io
