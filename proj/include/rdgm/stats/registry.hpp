#pragma once

// Method ids usable from study plans.

#include <algorithm>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "rdgm/core.hpp"
#include "rdgm/error.hpp"

namespace rdgm::stats {

enum class Measure { Power, AUC, Mean };

inline std::string_view to_string(Measure m) {
  switch (m) {
    case Measure::Power: return "power";
    case Measure::AUC: return "auc";
    case Measure::Mean: return "mean";
  }
  return "?";
}

inline Measure measure_from_string(std::string_view s) {
  for (auto m : {Measure::Power, Measure::AUC, Measure::Mean})
    if (to_string(m) == s) return m;
  throw ValidationError("unknown measure '" + std::string(s) + "'");
}

struct MethodInfo {
  std::string_view id;
  Family family;
  Measure measure;  // the only measure the method supports
};

inline constexpr std::array<MethodInfo, 9> kMethods{{
    {"chisq", Family::OrdinalTwoArm, Measure::Power},
    {"fisher-mc", Family::OrdinalTwoArm, Measure::Power},
    {"wilcoxon", Family::OrdinalTwoArm, Measure::Power},
    {"po-logit", Family::OrdinalTwoArm, Measure::Power},
    {"logrank", Family::SurvivalTwoArm, Measure::Power},
    {"tau2-dl", Family::MetaAnalysis, Measure::Mean},
    {"tau2-sj", Family::MetaAnalysis, Measure::Mean},
    {"de-logt", Family::DECounts, Measure::AUC},
    {"de-ranksum", Family::DECounts, Measure::AUC},
}};

inline const MethodInfo& find_method(std::string_view id) {
  for (const auto& m : kMethods)
    if (m.id == id) return m;
  throw ValidationError("unregistered method '" + std::string(id) + "'");
}

inline std::vector<std::string> methods_for(Family f) {
  std::vector<std::string> out;
  for (const auto& m : kMethods)
    if (m.family == f) out.emplace_back(m.id);
  return out;
}

}  // namespace rdgm::stats
