#include "spp/datasplit.hpp"

#include "spp/rng.hpp"

#include <algorithm>
#include <ostream>
#include <string>

namespace spp {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

void check_constraints(const LabelAllocation& a) {
  if (a.n < 1 || a.counts.rows() != a.n) throw std::invalid_argument("allocation shape mismatch");
  if ((a.counts.array() < 0).any()) throw std::domain_error("allocation infeasible: negative counts");
  if (a.total % a.n != 0 || a.total % kClasses != 0)
    throw std::domain_error("allocation infeasible: M must be divisible by n and by 10");
  for (Index i = 0; i < a.n; ++i)
    if (a.counts.row(i).sum() != a.total / a.n)
      throw std::domain_error("allocation infeasible: row " + std::to_string(i + 1) + " does not sum to M/n");
  for (int c = 0; c < kClasses; ++c)
    if (a.counts.col(c).sum() != a.total / kClasses)
      throw std::domain_error("allocation infeasible: column " + std::to_string(c + 1) +
                              " does not sum to M/10");
}

LabelAllocation allocation_counts(Index n, std::int64_t M, std::int64_t h,
                                  std::optional<std::int64_t> m0) {
  if (n < 1) throw std::invalid_argument("device count must be positive");
  if (h < 0) throw std::invalid_argument("heterogeneity difference h must be nonnegative");
  if (M <= 0 || M % (10 * n) != 0) throw std::invalid_argument("M must be a positive multiple of 10n");
  const bool cyclic_n = n <= kClasses;
  if (!cyclic_n && n % kClasses != 0)
    throw std::invalid_argument("for n > 10 the mod-10 pattern needs n to be a multiple of 10");

  const Index levels = cyclic_n ? n : kClasses;     // distinct offsets
  const std::int64_t reps = cyclic_n ? 1 : n / kClasses;  // copies of each offset per column
  auto level = [&](Index i, int c) -> std::int64_t { return (i + c) % levels; };

  LabelAllocation a;
  a.n = n;
  a.h = h;
  a.total = M;
  a.counts.resize(n, kClasses);

  // Column target M/10 = n*m0 + reps*h*levels*(levels-1)/2 over the cyclic block.
  const std::int64_t col_target = M / kClasses;
  const std::int64_t offsets = reps * h * static_cast<std::int64_t>(levels * (levels - 1) / 2);
  const std::int64_t block = col_target - offsets;  // = n * m0 if exact
  std::int64_t extra_levels = 0;
  if (m0) {
    a.m0 = *m0;
  } else {
    a.m0 = floor_div(block, n);
    // Residue n*frac(m0) is spread as +1 on the cells of the highest offset levels;
    // each level is a permutation pattern, so row and column sums move together.
    const std::int64_t residue = block - n * a.m0;
    if (residue % reps != 0) throw std::domain_error("allocation infeasible: m0 residue not representable");
    extra_levels = residue / reps;
  }

  for (Index i = 0; i < n; ++i)
    for (int c = 0; c < kClasses; ++c) {
      if (cyclic_n && c >= n) {
        a.counts(i, c) = M / (10 * n);
        continue;
      }
      const std::int64_t lv = level(i, c);
      a.counts(i, c) = a.m0 + h * lv + (lv >= levels - extra_levels ? 1 : 0);
    }
  check_constraints(a);
  return a;
}

LabelAllocation allocation_hmax(Index n, std::int64_t M) {
  if (n != 8) throw std::invalid_argument("h_max allocation is only defined for n = 8");
  if (M <= 0 || M % 80 != 0 || M % 50 != 0) throw std::invalid_argument("M must be divisible by 80 and 50");
  LabelAllocation a;
  a.n = n;
  a.total = M;
  a.counts.resize(n, kClasses);
  const std::int64_t full = M / 50;  // M/10 spread over the 5 devices holding the class
  for (Index i = 0; i < n; ++i)
    for (int c = 0; c < kClasses; ++c) {
      if (c >= 8) {
        a.counts(i, c) = M / (10 * n);
        continue;
      }
      // device i misses classes i+1, i+2, i+3 (cyclic over the first eight)
      const Index gap = ((c - i) % 8 + 8) % 8;
      a.counts(i, c) = (gap >= 1 && gap <= 3) ? 0 : full;
    }
  check_constraints(a);
  return a;
}

Partition partition(std::span<const int> labels, const LabelAllocation& a, std::uint64_t seed) {
  std::vector<std::vector<Index>> by_class(kClasses);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || labels[r] >= kClasses) throw std::invalid_argument("label out of range");
    by_class[labels[r]].push_back(static_cast<Index>(r));
  }
  Partition out(a.n);
  for (int c = 0; c < kClasses; ++c) {
    const std::int64_t need = a.counts.col(c).sum();
    if (static_cast<std::int64_t>(by_class[c].size()) < need)
      throw std::domain_error("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                              " samples, allocation needs " + std::to_string(need));
    Stream rng = make_stream(seed, static_cast<std::uint64_t>(c), Purpose::partition);
    auto& pool = by_class[c];
    for (std::size_t t = pool.size(); t > 1; --t) {
      std::uniform_int_distribution<std::size_t> pick(0, t - 1);
      std::swap(pool[t - 1], pool[pick(rng)]);
    }
    std::size_t pos = 0;
    for (Index i = 0; i < a.n; ++i)
      for (std::int64_t t = 0; t < a.counts(i, c); ++t) out[i].push_back(pool[pos++]);
  }
  return out;
}

void write_allocation_csv(const LabelAllocation& a, std::ostream& out) {
  out << "node";
  for (int c = 1; c <= kClasses; ++c) out << ',' << c;
  out << '\n';
  for (Index i = 0; i < a.n; ++i) {
    out << i + 1;
    for (int c = 0; c < kClasses; ++c) out << ',' << a.counts(i, c);
    out << '\n';
  }
}

}  // namespace spp
