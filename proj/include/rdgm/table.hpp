#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "rdgm/error.hpp"

namespace rdgm {

/// Two-group by K-category count table. Row 0 is group 1.
struct TwoByK {
  std::vector<std::int64_t> row1;
  std::vector<std::int64_t> row2;

  TwoByK() = default;
  TwoByK(std::vector<std::int64_t> a, std::vector<std::int64_t> b) : row1(std::move(a)), row2(std::move(b)) {
    if (row1.size() != row2.size()) throw ValidationError("2xK table rows differ in length");
  }

  [[nodiscard]] std::size_t categories() const { return row1.size(); }
  [[nodiscard]] std::int64_t column(std::size_t k) const { return row1[k] + row2[k]; }
  [[nodiscard]] std::int64_t sum1() const {
    std::int64_t s = 0;
    for (auto v : row1) s += v;
    return s;
  }
  [[nodiscard]] std::int64_t sum2() const {
    std::int64_t s = 0;
    for (auto v : row2) s += v;
    return s;
  }
  [[nodiscard]] std::int64_t total() const { return sum1() + sum2(); }

  /// Same table with groups swapped.
  [[nodiscard]] TwoByK swapped() const { return TwoByK(row2, row1); }

  friend bool operator==(const TwoByK&, const TwoByK&) = default;
};

}  // namespace rdgm
