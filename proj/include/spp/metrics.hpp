#pragma once

#include "spp/common.hpp"
#include "spp/objectives.hpp"

#include <iosfwd>
#include <memory>
#include <span>
#include <string_view>

namespace spp {

struct AugmentedState;
struct DeviceState;

enum class Regime { non_vr, vr_only, gt_vr };

std::string_view to_string(Regime regime);

/// Weights of T = c0 opt_gap + c1 consensus + c2 delayed_vr + c3 vr + c4 gt.
struct LyapunovCoeffs {
  Regime regime = Regime::non_vr;
  double c0 = 1.0, c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
};

LyapunovCoeffs lyapunov_coeffs(Regime regime, double alpha, double L, Index n, Index M,
                               double rho_rw, double r, double p, double q);

struct IterationMetrics {
  double f_gap = 0.0;
  double opt_gap = 0.0;
  double consensus_err = 0.0;
  double vr_err = 0.0;
  double delayed_vr_err = 0.0;
  double gt_err = 0.0;
  double lyapunov = 0.0;
};

/// Terms with a zero coefficient are skipped, so untracked (NaN) terms cannot leak in.
double lyapunov_value(const LyapunovCoeffs& c, const IterationMetrics& m);

/// Where the delayed VR term reads grad F(X_{t_k}) from.
enum class DelayedSource {
  none,      // no VR: reported as NaN
  table,     // SAGA-style: every step is a (partial) refresh, t_k = k
  snapshot,  // SVRG/SARAH-style: last full-batch refresh
};

struct MeasureContext {
  std::shared_ptr<const FiniteSumObjective> problem;
  Vector x_star;
  double f_star = 0.0;
  LyapunovCoeffs coeffs;
  DelayedSource delayed = DelayedSource::none;
  Matrix grad_at_opt;  // grad F(1 x*), cached when M*d is small enough; else recomputed
};

MeasureContext make_measure_context(std::shared_ptr<const FiniteSumObjective> problem,
                                    Vector x_star, LyapunovCoeffs coeffs, DelayedSource delayed);

IterationMetrics measure(const AugmentedState& state, const MeasureContext& ctx);
IterationMetrics measure(const DeviceState& state, const MeasureContext& ctx);

/// Shared tail of both measure() overloads, given the device-level quantities.
IterationMetrics measure_terms(const Matrix& xhat, const Matrix& yhat, double vr_err,
                               double delayed_vr_err, const MeasureContext& ctx);

struct RateFit {
  double rate = 1.0;       // per-iteration contraction factor exp(slope)
  double r_squared = 1.0;
  std::size_t points = 0;
};

struct RateFitOptions {
  std::size_t burn_in = 0;     // leading points dropped
  double floor_factor = 1e3;   // drop values below floor_factor * eps * T_0
};

RateFit rate_fit(std::span<const std::pair<double, double>> series, const RateFitOptions& options = {});

struct TrajectoryRecord {
  std::int64_t k = 0;
  IterationMetrics metrics;
  double wall_seconds = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  double alpha = 0.0;
};

/// `k,f_gap,opt_gap,consensus_err,vr_err,delayed_vr_err,gt_err,lyapunov`, %.17g.
void write_trajectory_csv(const Trajectory& t, std::ostream& out);

}  // namespace spp
