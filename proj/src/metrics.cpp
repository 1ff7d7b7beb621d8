#include "spp/metrics.hpp"

#include "spp/algorithms.hpp"
#include "spp/reference.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace spp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr Index kCacheLimit = 4'000'000;  // doubles kept for grad F(1 x*)

// sum_s ||rows(s) - grad f_s(x*)||^2
double distance_to_opt(const Matrix& rows, const MeasureContext& ctx) {
  if (ctx.grad_at_opt.size() > 0) return (rows - ctx.grad_at_opt).squaredNorm();
  const auto& f = *ctx.problem;
  Vector g(f.dim());
  double acc = 0.0;
  for (Index s = 0; s < rows.rows(); ++s) {
    f.sample_gradient(s, ctx.x_star.data(), g.data());
    acc += (rows.row(s) - g.transpose()).squaredNorm();
  }
  return acc;
}

// sum_i sum_{s in device i} ||grad f_s(point_i) - grad f_s(x*)||^2
double snapshot_distance(const Matrix& points, const MeasureContext& ctx) {
  const auto& f = *ctx.problem;
  const Index m = f.samples_per_device();
  Vector g(f.dim()), gopt(f.dim());
  double acc = 0.0;
  for (Index i = 0; i < f.devices(); ++i)
    for (Index j = 0; j < m; ++j) {
      const Index s = i * m + j;
      f.sample_gradient(s, points.row(i).data(), g.data());
      if (ctx.grad_at_opt.size() > 0)
        acc += (g.transpose() - ctx.grad_at_opt.row(s)).squaredNorm();
      else {
        f.sample_gradient(s, ctx.x_star.data(), gopt.data());
        acc += (g - gopt).squaredNorm();
      }
    }
  return acc;
}

void put(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << ',' << buf;
}

}  // namespace

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::non_vr: return "non_vr";
    case Regime::vr_only: return "vr_only";
    case Regime::gt_vr: return "gt_vr";
  }
  return "?";
}

LyapunovCoeffs lyapunov_coeffs(Regime regime, double alpha, double L, Index n, Index M, double rho,
                               double r, double p, double q) {
  if (alpha < 0.0 || !(L > 0.0) || n < 1 || M < 1)
    throw std::invalid_argument("lyapunov_coeffs: need alpha >= 0, L > 0, n, M >= 1");
  if (rho < 0.0 || rho >= 1.0) throw std::domain_error("lyapunov_coeffs: rho_{r,W} must lie in [0, 1)");
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(M);
  LyapunovCoeffs c;
  c.regime = regime;
  switch (regime) {
    case Regime::non_vr:
      if (r < 0.0 || r > 1.0) throw std::invalid_argument("lyapunov_coeffs: r must lie in [0, 1]");
      c.c1 = (1.0 - r) * 8.0 * alpha * L * (4.0 * alpha * L + 1.0) / (nn * (1.0 - rho));
      break;
    case Regime::vr_only:
      if (!(p > 0.0) || !(q > 0.0)) throw std::invalid_argument("lyapunov_coeffs: vr_only needs p, q > 0");
      c.c1 = 20.0 * L * alpha / (nn * (1.0 - rho));
      c.c2 = 5.0 * alpha * alpha / (mm * p);
      c.c3 = 16.0 * alpha * alpha / (mm * q);
      break;
    case Regime::gt_vr:
      if (!(q > 0.0)) throw std::invalid_argument("lyapunov_coeffs: gt_vr needs q > 0");
      if (rho == 0.0) throw std::domain_error("lyapunov_coeffs: gt_vr consensus weight needs rho_{r,W} > 0");
      c.c1 = (1.0 - rho) / (nn * rho * (1.0 + rho));
      c.c3 = 20.0 * alpha * alpha / (mm * q * (1.0 - rho) * (1.0 - rho));
      c.c4 = 8.0 * alpha * alpha / (nn * (1.0 - rho));
      break;
  }
  return c;
}

double lyapunov_value(const LyapunovCoeffs& c, const IterationMetrics& m) {
  double t = 0.0;
  const std::pair<double, double> terms[] = {{c.c0, m.opt_gap},
                                             {c.c1, m.consensus_err},
                                             {c.c2, m.delayed_vr_err},
                                             {c.c3, m.vr_err},
                                             {c.c4, m.gt_err}};
  for (auto [w, v] : terms)
    if (w != 0.0) t += w * v;
  return t;
}

MeasureContext make_measure_context(std::shared_ptr<const FiniteSumObjective> problem, Vector x_star,
                                    LyapunovCoeffs coeffs, DelayedSource delayed) {
  MeasureContext ctx;
  ctx.f_star = problem->value(x_star);
  if (problem->total_samples() * problem->dim() <= kCacheLimit) {
    ctx.grad_at_opt.resize(problem->total_samples(), problem->dim());
    for (Index s = 0; s < problem->total_samples(); ++s)
      problem->sample_gradient(s, x_star.data(), ctx.grad_at_opt.row(s).data());
  }
  ctx.problem = std::move(problem);
  ctx.x_star = std::move(x_star);
  ctx.coeffs = coeffs;
  ctx.delayed = delayed;
  return ctx;
}

IterationMetrics measure_terms(const Matrix& xhat, const Matrix& yhat, double vr_err,
                               double delayed_vr_err, const MeasureContext& ctx) {
  IterationMetrics out;
  const Eigen::RowVectorXd xbar = xhat.colwise().mean();
  const Eigen::RowVectorXd ybar = yhat.colwise().mean();
  out.opt_gap = (xbar - ctx.x_star.transpose()).squaredNorm();
  out.consensus_err = (xhat.rowwise() - xbar).squaredNorm();
  out.gt_err = (yhat.rowwise() - ybar).squaredNorm();
  out.vr_err = vr_err;
  out.delayed_vr_err = delayed_vr_err;
  out.f_gap = ctx.problem->value(xbar.transpose()) - ctx.f_star;
  out.lyapunov = lyapunov_value(ctx.coeffs, out);
  return out;
}

IterationMetrics measure(const AugmentedState& state, const MeasureContext& ctx) {
  const double vr = distance_to_opt(state.grad, ctx);
  double delayed = kNaN;
  if (ctx.delayed == DelayedSource::table) delayed = vr;
  if (ctx.delayed == DelayedSource::snapshot) delayed = distance_to_opt(state.refresh_grad, ctx);
  return measure_terms(projected_x(state), projected_y(state), vr, delayed, ctx);
}

IterationMetrics measure(const DeviceState& state, const MeasureContext& ctx) {
  const double vr = state.grad_table.size() > 0 ? distance_to_opt(state.grad_table, ctx) : kNaN;
  double delayed = kNaN;
  if (ctx.delayed == DelayedSource::table) delayed = vr;
  if (ctx.delayed == DelayedSource::snapshot && state.snapshot.size() > 0)
    delayed = snapshot_distance(state.snapshot, ctx);
  return measure_terms(state.xhat, state.yhat, vr, delayed, ctx);
}

RateFit rate_fit(std::span<const std::pair<double, double>> series, const RateFitOptions& options) {
  if (series.size() < 10) throw std::invalid_argument("rate_fit needs at least 10 points");
  const double t0 = series.front().second;
  if (!(t0 > 0.0)) throw std::invalid_argument("rate_fit needs a positive series");
  const double floor = options.floor_factor * std::numeric_limits<double>::epsilon() * t0;

  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  std::size_t count = 0;
  for (std::size_t i = options.burn_in; i < series.size(); ++i) {
    const auto [k, t] = series[i];
    if (!(t > floor)) break;  // the tail below the floor is rounding noise
    const double y = std::log(t);
    sx += k;
    sy += y;
    sxx += k * k;
    sxy += k * y;
    syy += y * y;
    ++count;
  }
  if (count < 2) throw std::domain_error("rate_fit: series degenerate (fewer than 2 points above the floor)");
  const double nn = static_cast<double>(count);
  const double vx = sxx - sx * sx / nn;
  const double vy = syy - sy * sy / nn;
  const double cxy = sxy - sx * sy / nn;
  if (vx <= 0.0) throw std::domain_error("rate_fit: all points share one iteration index");
  const double slope = cxy / vx;
  RateFit out;
  out.rate = std::exp(slope);
  out.r_squared = vy <= 1e-300 * nn ? 1.0 : (cxy * cxy) / (vx * vy);
  out.points = count;
  return out;
}

void write_trajectory_csv(const Trajectory& t, std::ostream& out) {
  out << "k,f_gap,opt_gap,consensus_err,vr_err,delayed_vr_err,gt_err,lyapunov\n";
  for (const auto& rec : t.records) {
    const auto& m = rec.metrics;
    out << rec.k;
    put(out, m.f_gap);
    put(out, m.opt_gap);
    put(out, m.consensus_err);
    put(out, m.vr_err);
    put(out, m.delayed_vr_err);
    put(out, m.gt_err);
    put(out, m.lyapunov);
    out << '\n';
  }
}

}  // namespace spp
