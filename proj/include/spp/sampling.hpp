#pragma once

#include "spp/common.hpp"
#include "spp/rng.hpp"
#include "spp/topology.hpp"

#include <memory>
#include <span>

namespace spp {

/// Which samples participate in one iteration: b of the m local samples on every device.
class SampleMask {
 public:
  /// `selected` holds n*b local indices, device-major, sorted within each device.
  SampleMask(Index n, Index m, Index b, std::vector<std::uint32_t> selected);

  static SampleMask full(Index n, Index m);

  Index devices() const { return n_; }
  Index per_device() const { return m_; }
  Index batch() const { return b_; }
  Index total() const { return n_ * m_; }
  bool is_full() const { return b_ == m_; }

  std::span<const std::uint32_t> selected(Index device) const {
    return {selected_.data() + device * b_, static_cast<std::size_t>(b_)};
  }
  /// Global row index (i*m + j) of the t-th selected sample of device i.
  Index row(Index device, Index t) const { return device * m_ + selected_[device * b_ + t]; }
  /// e_k as a 0/1 vector of length M.
  const std::vector<std::uint8_t>& indicator() const { return indicator_; }
  bool contains(Index global_row) const { return indicator_[global_row] != 0; }

 private:
  Index n_, m_, b_;
  std::vector<std::uint32_t> selected_;
  std::vector<std::uint8_t> indicator_;
};

/// Uniform without-replacement b-subset per device, independent across devices.
SampleMask draw_mask(Index n, Index m, Index b, Stream& stream);

enum class TrackingChoice { identity, mixing };      // G_k in {I_n, W_k}
enum class LocalChoice { identity, averaging };      // V_k in {I_m, J_m}

struct IterationDraw {
  std::int64_t k = 0;
  SampleMask mask;       // Lambda_k
  SampleMask next_mask;  // Lambda_{k+1}
  std::shared_ptr<const MixingMatrix> mixing;  // W_k
  TrackingChoice tracking = TrackingChoice::identity;
  LocalChoice local = LocalChoice::identity;

  Index batch() const { return mask.batch(); }
};

/// Gamma_k = Lambda_{k+1} (W_k (x) 11^T) Lambda_k / b_k.
SparseMatrix build_gamma(const IterationDraw& draw);
/// R_k = I - Lambda_{k+1} + Gamma_k.
SparseMatrix build_row_mixing(const IterationDraw& draw, const SparseMatrix& gamma);
/// S = (I_n (x) 1^T) Lambda / b.
SparseMatrix build_projection(const SampleMask& mask);

/// C_k = G_k (x) V_k, kept factored; apply() never forms the Kronecker product.
class Correction {
 public:
  Correction(std::shared_ptr<const MixingMatrix> g, LocalChoice v, Index m);

  bool tracking_identity() const { return !g_ || g_->is_identity(); }
  LocalChoice local() const { return v_; }

  Matrix apply(const Matrix& y) const;
  SparseMatrix matrix() const;

 private:
  std::shared_ptr<const MixingMatrix> g_;  // null means I_n
  LocalChoice v_;
  Index m_;
  Index n_;
};

Correction build_correction(const IterationDraw& draw);

/// How the VR estimator chooses (V_k, b_k) each iteration.
struct BatchRule {
  enum class Kind {
    fixed,    // V_k = local, b_k = b
    refresh,  // L-SVRG: (J, m) w.p. p (always at k = 0), else (I, b)
    dynamic,  // SARAH: V_k = J, b_k = m w.p. p else b
  };
  Kind kind = Kind::fixed;
  Index b = 1;
  double p = 0.0;
  LocalChoice local = LocalChoice::identity;
};

struct VrDraw {
  LocalChoice local;
  Index batch;
};

VrDraw draw_vr(const BatchRule& rule, Index m, std::int64_t k, std::uint64_t seed);

/// Deterministic per-iteration randomness shared by the reference and reduced engines.
class DrawGenerator {
 public:
  DrawGenerator(MixingSchedule schedule, Index m, BatchRule rule, TrackingChoice tracking,
                std::uint64_t seed);

  SampleMask mask_at(std::int64_t k) const;
  IterationDraw draw(std::int64_t k) const;
  /// Same as draw(k) but reuses a mask already drawn for iteration k.
  IterationDraw draw(std::int64_t k, const SampleMask& mask_k) const;

  const MixingSchedule& schedule() const { return schedule_; }
  std::uint64_t seed() const { return seed_; }

 private:
  MixingSchedule schedule_;
  Index m_;
  BatchRule rule_;
  TrackingChoice tracking_;
  std::uint64_t seed_;
};

}  // namespace spp
