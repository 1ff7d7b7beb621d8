#pragma once

#include "spp/common.hpp"

#include <iosfwd>
#include <memory>
#include <string_view>

namespace spp {

enum class GraphKind { complete, identity, ring_directed, exponential, geometric };

GraphKind parse_graph_kind(std::string_view name);
std::string_view to_string(GraphKind kind);

/// Nonnegative doubly stochastic n x n weights.
class MixingMatrix {
 public:
  explicit MixingMatrix(Eigen::MatrixXd weights);

  static MixingMatrix identity(Index n);
  static MixingMatrix averaging(Index n);

  Index size() const { return w_.rows(); }
  const Eigen::MatrixXd& weights() const { return w_; }
  double operator()(Index i, Index j) const { return w_(i, j); }

  bool is_identity() const;
  bool is_averaging() const;

 private:
  Eigen::MatrixXd w_;
};

struct GraphParams {
  double radius = 0.5;       // geometric only
  std::uint64_t seed = 0;    // geometric only
  int max_attempts = 64;
};

MixingMatrix build_mixing(GraphKind kind, Index n, const GraphParams& params = {});

/// rho_W = ||W - J||_2^2.
double spectral_gap(const MixingMatrix& w);
/// ||W - J||_2 (unsquared), kept for reporting alongside rho_W.
double spectral_norm(const MixingMatrix& w);

/// rho_{r,W} = (1 - r) rho_W; throws when require_contraction and the result is >= 1.
double expected_contraction(double rho_w, double r, bool require_contraction = false);

enum class ScheduleMode { random, periodic };

/// W_k in {W, J}: J with probability r (random) or at k = 0 mod period (periodic).
class MixingSchedule {
 public:
  MixingSchedule(const MixingMatrix& base, double r, ScheduleMode mode = ScheduleMode::random,
                 std::int64_t period = 0);

  const MixingMatrix& base() const { return *base_; }
  double global_avg_prob() const { return r_; }
  ScheduleMode mode() const { return mode_; }
  std::int64_t period() const { return period_; }
  Index size() const { return base_->size(); }

  bool draws_average(std::int64_t k, std::uint64_t seed) const;
  const std::shared_ptr<const MixingMatrix>& draw(std::int64_t k, std::uint64_t seed) const;

  double rho_w() const;
  double rho_rw() const;

 private:
  std::shared_ptr<const MixingMatrix> base_;
  std::shared_ptr<const MixingMatrix> average_;
  double r_;
  ScheduleMode mode_;
  std::int64_t period_;
};

void write_csv(const MixingMatrix& w, std::ostream& out);
MixingMatrix read_mixing_csv(std::istream& in);

}  // namespace spp
