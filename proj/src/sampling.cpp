#include "spp/sampling.hpp"

#include <algorithm>
#include <numeric>

namespace spp {

SampleMask::SampleMask(Index n, Index m, Index b, std::vector<std::uint32_t> selected)
    : n_(n), m_(m), b_(b), selected_(std::move(selected)), indicator_(n * m, 0) {
  if (n < 1 || m < 1) throw std::invalid_argument("mask needs n >= 1 and m >= 1");
  if (b < 1 || b > m) throw std::invalid_argument("batch size b must satisfy 1 <= b <= m");
  if (static_cast<Index>(selected_.size()) != n * b)
    throw std::invalid_argument("mask selection must hold exactly n*b indices");
  for (Index i = 0; i < n; ++i) {
    for (Index t = 0; t < b; ++t) {
      const auto j = selected_[i * b + t];
      if (j >= m || (t > 0 && selected_[i * b + t - 1] >= j))
        throw std::invalid_argument("mask indices must be sorted, distinct and < m");
      indicator_[i * m + j] = 1;
    }
  }
}

SampleMask SampleMask::full(Index n, Index m) {
  std::vector<std::uint32_t> sel(n * m);
  for (Index i = 0; i < n; ++i)
    std::iota(sel.begin() + i * m, sel.begin() + (i + 1) * m, 0u);
  return SampleMask(n, m, m, std::move(sel));
}

SampleMask draw_mask(Index n, Index m, Index b, Stream& stream) {
  if (b < 1 || b > m) throw std::invalid_argument("batch size b must satisfy 1 <= b <= m");
  if (b == m) return SampleMask::full(n, m);
  std::vector<std::uint32_t> sel;
  sel.reserve(n * b);
  std::vector<std::uint32_t> perm(m);
  for (Index i = 0; i < n; ++i) {
    // partial Fisher-Yates: first b slots form the sample
    std::iota(perm.begin(), perm.end(), 0u);
    for (Index t = 0; t < b; ++t) {
      std::uniform_int_distribution<Index> pick(t, m - 1);
      std::swap(perm[t], perm[pick(stream)]);
    }
    std::sort(perm.begin(), perm.begin() + b);
    sel.insert(sel.end(), perm.begin(), perm.begin() + b);
  }
  return SampleMask(n, m, b, std::move(sel));
}

SparseMatrix build_gamma(const IterationDraw& draw) {
  const SampleMask& cur = draw.mask;
  const SampleMask& nxt = draw.next_mask;
  const Index n = cur.devices();
  const auto& w = *draw.mixing;
  const double inv_b = 1.0 / static_cast<double>(cur.batch());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(nxt.batch() * cur.batch() * n * n));
  for (Index i = 0; i < n; ++i)
    for (Index s = 0; s < nxt.batch(); ++s) {
      const Index row = nxt.row(i, s);
      for (Index j = 0; j < n; ++j) {
        if (w(i, j) == 0.0) continue;
        for (Index t = 0; t < cur.batch(); ++t) trip.emplace_back(row, cur.row(j, t), w(i, j) * inv_b);
      }
    }
  SparseMatrix g(cur.total(), cur.total());
  g.setFromTriplets(trip.begin(), trip.end());
  return g;
}

SparseMatrix build_row_mixing(const IterationDraw& draw, const SparseMatrix& gamma) {
  const Index total = draw.next_mask.total();
  SparseMatrix keep(total, total);
  std::vector<Eigen::Triplet<double>> trip;
  for (Index s = 0; s < total; ++s)
    if (!draw.next_mask.contains(s)) trip.emplace_back(s, s, 1.0);
  keep.setFromTriplets(trip.begin(), trip.end());
  return SparseMatrix(keep + gamma);
}

SparseMatrix build_projection(const SampleMask& mask) {
  const double inv_b = 1.0 / static_cast<double>(mask.batch());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mask.devices() * mask.batch()));
  for (Index i = 0; i < mask.devices(); ++i)
    for (Index t = 0; t < mask.batch(); ++t) trip.emplace_back(i, mask.row(i, t), inv_b);
  SparseMatrix s(mask.devices(), mask.total());
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

Correction::Correction(std::shared_ptr<const MixingMatrix> g, LocalChoice v, Index m)
    : g_(std::move(g)), v_(v), m_(m), n_(g_ ? g_->size() : 0) {}

Matrix Correction::apply(const Matrix& y) const {
  const Index n = y.rows() / m_;
  const Index d = y.cols();
  if (y.rows() != n * m_ || (g_ && g_->size() != n))
    throw std::invalid_argument("correction applied to a state of the wrong shape");
  Matrix out(y.rows(), d);
  if (v_ == LocalChoice::averaging) {
    Matrix z(n, d);
    for (Index i = 0; i < n; ++i) z.row(i) = y.middleRows(i * m_, m_).colwise().mean();
    if (g_) z = g_->weights() * z;
    for (Index i = 0; i < n; ++i) out.middleRows(i * m_, m_).rowwise() = z.row(i);
  } else if (!g_ || g_->is_identity()) {
    out = y;
  } else {
    const auto& g = g_->weights();
    out.setZero();
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        if (g(i, j) != 0.0) out.middleRows(i * m_, m_) += g(i, j) * y.middleRows(j * m_, m_);
  }
  return out;
}

SparseMatrix Correction::matrix() const {
  if (!g_) throw std::logic_error("identity-tracking correction needs an explicit device count");
  const Index n = g_->size();
  const Index total = n * m_;
  const double vw = v_ == LocalChoice::averaging ? 1.0 / static_cast<double>(m_) : 1.0;
  std::vector<Eigen::Triplet<double>> trip;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      const double gij = (*g_)(i, j);
      if (gij == 0.0) continue;
      for (Index a = 0; a < m_; ++a) {
        if (v_ == LocalChoice::averaging) {
          for (Index c = 0; c < m_; ++c) trip.emplace_back(i * m_ + a, j * m_ + c, gij * vw);
        } else {
          trip.emplace_back(i * m_ + a, j * m_ + a, gij);
        }
      }
    }
  SparseMatrix c(total, total);
  c.setFromTriplets(trip.begin(), trip.end());
  return c;
}

Correction build_correction(const IterationDraw& draw) {
  const Index n = draw.mask.devices();
  std::shared_ptr<const MixingMatrix> g =
      draw.tracking == TrackingChoice::mixing
          ? draw.mixing
          : std::make_shared<const MixingMatrix>(MixingMatrix::identity(n));
  return Correction(std::move(g), draw.local, draw.mask.per_device());
}

VrDraw draw_vr(const BatchRule& rule, Index m, std::int64_t k, std::uint64_t seed) {
  if (rule.b < 1 || rule.b > m) throw std::invalid_argument("batch size b must satisfy 1 <= b <= m");
  switch (rule.kind) {
    case BatchRule::Kind::fixed: return {rule.local, rule.b};
    case BatchRule::Kind::refresh: {
      bool refresh = k == 0;
      if (!refresh) {
        Stream rng = make_stream(seed, static_cast<std::uint64_t>(k), Purpose::vr);
        refresh = uniform01(rng) < rule.p;
      }
      return refresh ? VrDraw{LocalChoice::averaging, m} : VrDraw{LocalChoice::identity, rule.b};
    }
    case BatchRule::Kind::dynamic: {
      Stream rng = make_stream(seed, static_cast<std::uint64_t>(k), Purpose::vr);
      return {LocalChoice::averaging, uniform01(rng) < rule.p ? m : rule.b};
    }
  }
  throw std::logic_error("unknown batch rule");
}

DrawGenerator::DrawGenerator(MixingSchedule schedule, Index m, BatchRule rule,
                             TrackingChoice tracking, std::uint64_t seed)
    : schedule_(std::move(schedule)), m_(m), rule_(rule), tracking_(tracking), seed_(seed) {}

SampleMask DrawGenerator::mask_at(std::int64_t k) const {
  const VrDraw vr = draw_vr(rule_, m_, k, seed_);
  Stream rng = make_stream(seed_, static_cast<std::uint64_t>(k), Purpose::mask);
  return draw_mask(schedule_.size(), m_, vr.batch, rng);
}

IterationDraw DrawGenerator::draw(std::int64_t k) const { return draw(k, mask_at(k)); }

IterationDraw DrawGenerator::draw(std::int64_t k, const SampleMask& mask_k) const {
  const VrDraw vr = draw_vr(rule_, m_, k, seed_);
  if (mask_k.batch() != vr.batch) throw std::logic_error("mask batch disagrees with the VR draw");
  return IterationDraw{k,          mask_k,    mask_at(k + 1), schedule_.draw(k, seed_),
                       tracking_, vr.local};
}

}  // namespace spp
