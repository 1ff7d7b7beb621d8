#include "spp/algorithms.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace spp {

namespace {

constexpr std::array kPresets = {
    Preset::saga,     Preset::l_svrg,    Preset::sarah,    Preset::local_sgd,
    Preset::dsgd,     Preset::gossip_pga, Preset::local_saga, Preset::local_svrg,
    Preset::d_saga,   Preset::pga_saga,  Preset::gt_saga,  Preset::pga_gt_saga,
};

using MC = MixingChoice;
using LC = LocalChoiceSet;
using TC = TrackingChoiceSet;
using S = Symbol;

// Rows follow the published comparison table; SARAH comes from its
// SAGA/L-SVRG mixture row (V = J always, b_k in {b, m}).
constexpr std::array<PresetRow, 12> kTable = {{
    {Preset::saga, MC::scalar_one, LC::averaging, TC::scalar_one, S::zero, S::one, S::one, S::b_over_m},
    {Preset::l_svrg, MC::scalar_one, LC::identity_or_averaging, TC::scalar_one, S::zero, S::one, S::p, S::one},
    {Preset::sarah, MC::scalar_one, LC::averaging, TC::scalar_one, S::zero, S::one, S::one, S::p_or_b_over_m},
    {Preset::local_sgd, MC::identity_or_average, LC::identity, TC::identity, S::one, S::r, S::zero, S::zero},
    {Preset::dsgd, MC::fixed, LC::identity, TC::identity, S::rho_w, S::zero, S::zero, S::zero},
    {Preset::gossip_pga, MC::mixing_or_average, LC::identity, TC::identity, S::rho_w, S::r, S::zero, S::zero},
    {Preset::local_saga, MC::identity_or_average, LC::averaging, TC::identity, S::one, S::r, S::one, S::b_over_m},
    {Preset::local_svrg, MC::identity_or_average, LC::identity_or_averaging, TC::identity, S::one, S::r, S::p, S::one},
    {Preset::d_saga, MC::fixed, LC::averaging, TC::identity, S::rho_w, S::zero, S::one, S::b_over_m},
    {Preset::pga_saga, MC::mixing_or_average, LC::averaging, TC::identity, S::rho_w, S::r, S::one, S::b_over_m},
    {Preset::gt_saga, MC::fixed, LC::averaging, TC::mixing, S::rho_w, S::zero, S::one, S::b_over_m},
    {Preset::pga_gt_saga, MC::mixing_or_average, LC::averaging, TC::mixing, S::rho_w, S::r, S::p, S::b_over_m},
}};

double div_or_inf(double num, double den) {
  return den == 0.0 ? std::numeric_limits<double>::infinity() : num / den;
}

Matrix mix(const MixingMatrix& w, const Matrix& z) {
  if (w.is_identity()) return z;
  if (w.is_averaging()) return z.colwise().mean().replicate(z.rows(), 1);
  return w.weights() * z;
}

Matrix device_means(const Matrix& table, Index n, Index m) {
  Matrix out(n, table.cols());
  for (Index i = 0; i < n; ++i) out.row(i) = table.middleRows(i * m, m).colwise().mean();
  return out;
}

bool uses_pga(Preset p) {
  return p == Preset::gossip_pga || p == Preset::pga_saga || p == Preset::pga_gt_saga;
}

bool uses_local(Preset p) {
  return p == Preset::local_sgd || p == Preset::local_saga || p == Preset::local_svrg;
}

bool uses_fixed(Preset p) {
  return p == Preset::dsgd || p == Preset::d_saga || p == Preset::gt_saga;
}

}  // namespace

std::string_view preset_name(Preset preset) {
  switch (preset) {
    case Preset::saga: return "SAGA";
    case Preset::l_svrg: return "L-SVRG";
    case Preset::sarah: return "SARAH";
    case Preset::local_sgd: return "Local-SGD";
    case Preset::dsgd: return "DSGD";
    case Preset::gossip_pga: return "Gossip-PGA";
    case Preset::local_saga: return "Local-SAGA";
    case Preset::local_svrg: return "Local-SVRG";
    case Preset::d_saga: return "D-SAGA";
    case Preset::pga_saga: return "PGA-SAGA";
    case Preset::gt_saga: return "GT-SAGA";
    case Preset::pga_gt_saga: return "PGA-GT-SAGA";
  }
  return "?";
}

Preset parse_preset(std::string_view name) {
  for (Preset p : kPresets)
    if (preset_name(p) == name) return p;
  throw std::invalid_argument("unknown algorithm preset '" + std::string(name) + "'");
}

std::span<const Preset> all_presets() { return kPresets; }

std::span<const PresetRow> preset_table() { return kTable; }

const PresetRow& preset_row(Preset preset) {
  for (const auto& row : kTable)
    if (row.preset == preset) return row;
  throw std::logic_error("preset missing from registry");
}

Regime regime_of(Preset preset) {
  switch (preset) {
    case Preset::local_sgd:
    case Preset::dsgd:
    case Preset::gossip_pga: return Regime::non_vr;
    case Preset::gt_saga:
    case Preset::pga_gt_saga: return Regime::gt_vr;
    default: return Regime::vr_only;
  }
}

DelayedSource delayed_source_of(Preset preset) {
  switch (preset) {
    case Preset::local_sgd:
    case Preset::dsgd:
    case Preset::gossip_pga: return DelayedSource::none;
    case Preset::l_svrg:
    case Preset::local_svrg:
    case Preset::sarah: return DelayedSource::snapshot;
    default: return DelayedSource::table;
  }
}

bool centralized(Preset preset) {
  return preset == Preset::saga || preset == Preset::l_svrg || preset == Preset::sarah;
}

StepsizeRegime parse_stepsize_regime(std::string_view name) {
  if (name == "non_vr") return StepsizeRegime::non_vr;
  if (name == "vr_only") return StepsizeRegime::vr_only;
  if (name == "gt_vr") return StepsizeRegime::gt_vr;
  if (name == "non_vr_convex") return StepsizeRegime::non_vr_convex;
  if (name == "vr_only_convex") return StepsizeRegime::vr_only_convex;
  if (name == "gt_vr_convex") return StepsizeRegime::gt_vr_convex;
  throw std::invalid_argument("unknown step-size regime '" + std::string(name) + "'");
}

StepsizeRegime stepsize_regime(Regime regime, bool convex) {
  switch (regime) {
    case Regime::non_vr: return convex ? StepsizeRegime::non_vr_convex : StepsizeRegime::non_vr;
    case Regime::vr_only: return convex ? StepsizeRegime::vr_only_convex : StepsizeRegime::vr_only;
    case Regime::gt_vr: return convex ? StepsizeRegime::gt_vr_convex : StepsizeRegime::gt_vr;
  }
  throw std::logic_error("unknown regime");
}

double max_stepsize(StepsizeRegime regime, double L, double rho) {
  if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
  if (rho < 0.0 || rho >= 1.0) throw std::domain_error("rho_{r,W} must lie in [0, 1)");
  const double gap = 1.0 - rho;
  const double s1 = std::sqrt(rho * (1.0 + rho));
  const double s2 = std::sqrt(2.0 * rho * (1.0 + rho));
  switch (regime) {
    case StepsizeRegime::non_vr:
      return std::min({1.0 / (5 * L), div_or_inf(gap, 4 * L * s1), div_or_inf(gap, 12 * L * s2)});
    case StepsizeRegime::vr_only:
      return std::min({1.0 / (64 * L), gap / (40 * L), div_or_inf(gap, 16 * L * s1)});
    case StepsizeRegime::gt_vr:
      return std::min({1.0 / (8 * L), div_or_inf(gap, 4 * L * s2), gap * gap / (528 * L)});
    case StepsizeRegime::non_vr_convex:
      return std::min(1.0 / (5 * L), div_or_inf(gap, 24 * L * s1));
    case StepsizeRegime::vr_only_convex:
      return std::min({1.0 / (64 * L), gap / (40 * L), div_or_inf(gap, 32 * L * s1)});
    case StepsizeRegime::gt_vr_convex:
      return std::min({1.0 / (8 * L), div_or_inf(gap, 4 * L * s2), gap * gap / (1056 * L)});
  }
  throw std::logic_error("unknown step-size regime");
}

MixingSchedule schedule_for(Preset preset, const MixingMatrix& base, double r, ScheduleMode mode,
                            std::int64_t period) {
  if (centralized(preset)) return MixingSchedule(base, 1.0);
  if (uses_local(preset)) return MixingSchedule(MixingMatrix::identity(base.size()), r, mode, period);
  if (uses_fixed(preset)) return MixingSchedule(base, 0.0);
  return MixingSchedule(base, r, mode, period);
}

BatchRule batch_rule(Preset preset, Index b, double p) {
  switch (preset) {
    case Preset::local_sgd:
    case Preset::dsgd:
    case Preset::gossip_pga: return {BatchRule::Kind::fixed, b, 0.0, LocalChoice::identity};
    case Preset::l_svrg:
    case Preset::local_svrg: return {BatchRule::Kind::refresh, b, p, LocalChoice::averaging};
    case Preset::sarah: return {BatchRule::Kind::dynamic, b, p, LocalChoice::averaging};
    default: return {BatchRule::Kind::fixed, b, 0.0, LocalChoice::averaging};
  }
}

TrackingChoice tracking_of(Preset preset) {
  return preset == Preset::gt_saga || preset == Preset::pga_gt_saga ? TrackingChoice::mixing
                                                                     : TrackingChoice::identity;
}

void validate_setup(const AlgorithmSetup& s) {
  const std::string name(preset_name(s.preset));
  if (!s.problem) throw std::invalid_argument(name + ": no problem given");
  const Index n = s.schedule.size();
  const Index m = s.problem->samples_per_device();
  const double r = s.schedule.global_avg_prob();
  if (n != s.problem->devices())
    throw std::invalid_argument(name + ": topology has " + std::to_string(n) + " devices, problem has " +
                                std::to_string(s.problem->devices()));
  if (centralized(s.preset) && n != 1)
    throw std::invalid_argument(name + " is centralized and needs n = 1");
  if (uses_local(s.preset) && !s.schedule.base().is_identity())
    throw std::invalid_argument(name + " alternates I_n and J_n; its base graph must be the identity");
  if (uses_fixed(s.preset) && r != 0.0)
    throw std::invalid_argument(name + " uses a fixed mixing matrix and needs r = 0");
  if (uses_pga(s.preset) && !(r > 0.0 && r <= 1.0))
    throw std::invalid_argument(name + " needs a global-averaging probability r in (0, 1]");
  if (s.options.batch < 1 || s.options.batch > m)
    throw std::invalid_argument(name + ": batch b must satisfy 1 <= b <= m");
  const auto rule = batch_rule(s.preset, s.options.batch, s.options.p);
  if (rule.kind != BatchRule::Kind::fixed && !(s.options.p > 0.0 && s.options.p <= 1.0))
    throw std::invalid_argument(name + " needs a switching probability p in (0, 1]");
  if (!(s.alpha >= 0.0) || !std::isfinite(s.alpha))
    throw std::invalid_argument(name + ": step size must be finite and nonnegative");
}

DrawGenerator make_draws(const AlgorithmSetup& s, std::uint64_t seed) {
  return DrawGenerator(s.schedule, s.problem->samples_per_device(),
                       batch_rule(s.preset, s.options.batch, s.options.p), tracking_of(s.preset), seed);
}

ResolvedParams resolve_parameters(const AlgorithmSetup& s) {
  validate_setup(s);
  ResolvedParams out;
  const Index n = s.schedule.size();
  const double b_over_m =
      static_cast<double>(s.options.batch) / static_cast<double>(s.problem->samples_per_device());
  out.rho_w = s.schedule.rho_w();
  out.r = n == 1 ? 1.0 : s.schedule.global_avg_prob();
  const auto rule = batch_rule(s.preset, s.options.batch, s.options.p);
  switch (rule.kind) {
    case BatchRule::Kind::fixed:
      if (rule.local == LocalChoice::averaging) {
        out.p = 1.0;
        out.q = b_over_m;
      }
      break;
    case BatchRule::Kind::refresh:
      out.p = s.options.p;
      out.q = 1.0;
      break;
    case BatchRule::Kind::dynamic:
      out.p = 1.0;
      out.q = s.options.p + (1.0 - s.options.p) * b_over_m;
      break;
  }
  out.rho_rw = expected_contraction(out.rho_w, out.r);
  return out;
}

// --- stepper -----------------------------------------------------------------

Stepper::Stepper(AlgorithmSetup setup) : setup_(std::move(setup)) {
  validate_setup(setup_);
  const auto rule = batch_rule(setup_.preset, setup_.options.batch, setup_.options.p);
  if (tracking_of(setup_.preset) == TrackingChoice::mixing)
    estimator_ = Estimator::tracking;
  else if (rule.kind == BatchRule::Kind::refresh)
    estimator_ = Estimator::snapshot;
  else if (rule.local == LocalChoice::averaging)
    estimator_ = Estimator::table;
  else
    estimator_ = Estimator::fresh;

  const bool needs_table = estimator_ == Estimator::table || estimator_ == Estimator::tracking;
  track_table_ = setup_.options.track_gradient_table.value_or(needs_table);
  if (needs_table && !track_table_)
    throw std::invalid_argument(std::string(preset_name(setup_.preset)) +
                                " cannot run without its gradient table");
  keeps_snapshot_ = delayed_source_of(setup_.preset) == DelayedSource::snapshot;
}

Stepper make_stepper(AlgorithmSetup setup) { return Stepper(std::move(setup)); }

void Stepper::refresh_device_avg(DeviceState& state) const {
  state.device_grad_avg = device_means(state.grad_table, problem().devices(), problem().samples_per_device());
}

DeviceState Stepper::init(const Vector& x0, const SampleMask& mask0) const {
  const auto& f = problem();
  const Index n = f.devices();
  const Index m = f.samples_per_device();
  const Index d = f.dim();
  if (x0.size() != d) throw std::invalid_argument("x0 has the wrong dimension");
  if (mask0.devices() != n || mask0.per_device() != m) throw std::invalid_argument("mask shape mismatch");

  DeviceState st;
  st.xhat = x0.transpose().replicate(n, 1);
  st.yhat = Matrix::Zero(n, d);
  Vector g(d);
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < mask0.batch(); ++t) {
      f.sample_gradient(mask0.row(i, t), x0.data(), g.data());
      st.yhat.row(i) += g.transpose();
    }
  st.yhat /= static_cast<double>(mask0.batch());

  const bool need_avg = track_table_ || keeps_snapshot_ || estimator_ == Estimator::tracking;
  if (track_table_) {
    st.grad_table.resize(n * m, d);
    for (Index s = 0; s < n * m; ++s) f.sample_gradient(s, x0.data(), st.grad_table.row(s).data());
    refresh_device_avg(st);
  } else if (need_avg) {
    st.device_grad_avg = Matrix::Zero(n, d);
    for (Index i = 0; i < n; ++i) st.device_grad_avg.row(i) = f.device_gradient(i, x0).transpose();
  }
  if (estimator_ == Estimator::tracking) st.tracker = st.device_grad_avg;
  if (keeps_snapshot_) {
    st.snapshot = st.xhat;
    st.snapshot_grad_avg = st.device_grad_avg;
  }
  st.mask = mask0;
  return st;
}

void Stepper::advance(DeviceState& st, const IterationDraw& draw) const {
  const auto& f = problem();
  const Index n = f.devices();
  const Index m = f.samples_per_device();
  const Index d = f.dim();
  if (draw.k != st.k) throw std::logic_error("draw index does not match state iteration");
  if (st.mask && st.mask->indicator() != draw.mask.indicator())
    throw std::logic_error("draw mask disagrees with the mask drawn for this iteration");

  // Full-batch averaging step: every sample row sits at x-hat_k, so this is a refresh.
  if (keeps_snapshot_ && draw.local == LocalChoice::averaging && draw.mask.is_full()) {
    st.snapshot = st.xhat;
    for (Index i = 0; i < n; ++i) {
      const Vector xi = st.xhat.row(i).transpose();
      st.snapshot_grad_avg.row(i) = f.device_gradient(i, xi).transpose();
    }
    st.last_refresh = st.k;
    st.estimator_ready = true;
  }

  const MixingMatrix& w = *draw.mixing;
  Matrix x_next = mix(w, st.xhat - setup_.alpha * st.yhat);
  if (!x_next.allFinite()) throw DivergenceError(st.k + 1, "non-finite iterate");

  Matrix mixed_tracker;
  if (estimator_ == Estimator::tracking) mixed_tracker = mix(w, st.tracker);

  const SampleMask& nxt = draw.next_mask;
  const double inv_b = 1.0 / static_cast<double>(nxt.batch());
  Matrix y_next(n, d);
  Matrix delta = Matrix::Zero(n, d);
  Vector g(d), gs(d), acc(d);
  for (Index i = 0; i < n; ++i) {
    acc.setZero();
    const double* xi = x_next.row(i).data();
    for (Index t = 0; t < nxt.batch(); ++t) {
      const Index s = nxt.row(i, t);
      f.sample_gradient(s, xi, g.data());
      switch (estimator_) {
        case Estimator::fresh: acc += g; break;
        case Estimator::table:
        case Estimator::tracking: acc += g - st.grad_table.row(s).transpose(); break;
        case Estimator::snapshot:
          acc += g;
          if (st.estimator_ready) {
            f.sample_gradient(s, st.snapshot.row(i).data(), gs.data());
            acc -= gs;
          }
          break;
      }
      if (track_table_) {
        delta.row(i) += g.transpose() - st.grad_table.row(s);
        st.grad_table.row(s) = g.transpose();
      }
    }
    switch (estimator_) {
      case Estimator::fresh: y_next.row(i) = inv_b * acc.transpose(); break;
      case Estimator::table: y_next.row(i) = st.device_grad_avg.row(i) + inv_b * acc.transpose(); break;
      case Estimator::tracking: y_next.row(i) = mixed_tracker.row(i) + inv_b * acc.transpose(); break;
      case Estimator::snapshot:
        y_next.row(i) = inv_b * acc.transpose();
        if (st.estimator_ready) y_next.row(i) += st.snapshot_grad_avg.row(i);
        break;
    }
  }
  if (!y_next.allFinite()) throw DivergenceError(st.k + 1, "non-finite gradient estimate");

  if (track_table_) {
    st.device_grad_avg += delta / static_cast<double>(m);
    // bound accumulated rounding in the incremental averages
    if ((st.k + 1) % 1024 == 0) refresh_device_avg(st);
  }
  if (estimator_ == Estimator::tracking) st.tracker = mixed_tracker + delta / static_cast<double>(m);

  st.xhat = std::move(x_next);
  st.yhat = std::move(y_next);
  st.mask = nxt;
  ++st.k;
}

DeviceState Stepper::step(const DeviceState& state, const IterationDraw& draw) const {
  DeviceState next = state;
  advance(next, draw);
  return next;
}

void run_reduced(const Stepper& stepper, const MeasureContext& ctx, const RunOptions& options,
                 Trajectory& out) {
  if (options.iterations < 1) throw std::invalid_argument("iteration count K must be >= 1");
  if (options.eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  const DrawGenerator draws = stepper.draws(options.seed);
  DeviceState state = stepper.init(options.x0, draws.mask_at(0));

  out.records.clear();
  out.alpha = stepper.alpha();
  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t k = 0;; ++k) {
    if (k % options.eval_every == 0 || k == options.iterations) {
      TrajectoryRecord rec{k, measure(state, ctx),
                           std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
      out.records.push_back(rec);
      if (options.on_eval) options.on_eval(k, state.xhat.colwise().mean().transpose());
    }
    if (k == options.iterations) break;
    stepper.advance(state, draws.draw(k, *state.mask));
  }
}

Trajectory run_reduced(const Stepper& stepper, const MeasureContext& ctx, const RunOptions& options) {
  Trajectory t;
  run_reduced(stepper, ctx, options, t);
  return t;
}

}  // namespace spp
