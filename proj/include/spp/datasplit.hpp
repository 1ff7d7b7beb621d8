#pragma once

#include "spp/common.hpp"

#include <iosfwd>
#include <optional>
#include <span>

namespace spp {

inline constexpr int kClasses = 10;

/// counts(i, c): samples of class c placed on device i.
struct LabelAllocation {
  Index n = 0;
  std::int64_t h = 0;
  std::int64_t m0 = 0;
  std::int64_t total = 0;  // M
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, kClasses, Eigen::RowMajor> counts;

  std::int64_t count(Index i, int c) const { return counts(i, c); }
};

/// Cyclic arithmetic label skew with difference h. m0 is derived from (n, M, h) when omitted.
LabelAllocation allocation_counts(Index n, std::int64_t M, std::int64_t h,
                                  std::optional<std::int64_t> m0 = std::nullopt);

/// The banded n = 8 pattern: three missing classes per device among the first eight.
LabelAllocation allocation_hmax(Index n, std::int64_t M);

/// Throws naming the violated constraint (row sums M/n, column sums M/10, nonnegativity).
void check_constraints(const LabelAllocation& a);

/// Seeded per-class shuffle, then classes dealt to devices in order.
Partition partition(std::span<const int> labels, const LabelAllocation& a, std::uint64_t seed);

void write_allocation_csv(const LabelAllocation& a, std::ostream& out);

}  // namespace spp
