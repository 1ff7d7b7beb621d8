#include "doctest.h"

#include "spp/metrics.hpp"
#include "spp/reference.hpp"
#include "spp/verification.hpp"

#include <cmath>
#include <sstream>

using namespace spp;

namespace {

bool same(double a, double b, double tol) { return (std::isnan(a) && std::isnan(b)) || std::abs(a - b) <= tol; }

}  // namespace

TEST_CASE("Lyapunov coefficients") {
  const LyapunovCoeffs a = lyapunov_coeffs(Regime::non_vr, 0.05, 1, 4, 24, 0.5, 1.0, 0, 0);
  CHECK(a.c0 == 1.0);
  CHECK(a.c1 == 0.0);
  const LyapunovCoeffs b = lyapunov_coeffs(Regime::non_vr, 0.05, 2, 4, 24, 0.5, 0.2, 0, 0);
  CHECK(b.c1 == doctest::Approx(0.8 * 8 * 0.1 * (4 * 0.1 + 1) / (4 * 0.5)));
  CHECK(b.c2 == 0.0);
  CHECK(b.c3 == 0.0);
  CHECK(b.c4 == 0.0);

  const LyapunovCoeffs g = lyapunov_coeffs(Regime::gt_vr, 0.01, 1, 4, 24, 0.5, 0, 1, 0.5);
  CHECK(g.c3 == doctest::Approx(2.0 / 3 * 1e-3));
  CHECK(g.c1 == doctest::Approx(0.5 / (4 * 0.5 * 1.5)));
  CHECK(g.c4 == doctest::Approx(8 * 1e-4 / (4 * 0.5)));
  CHECK(g.c2 == 0.0);

  const LyapunovCoeffs v = lyapunov_coeffs(Regime::vr_only, 0.1, 1, 1, 4, 0.0, 1, 1, 1);
  CHECK(v.c2 == doctest::Approx(0.0125));
  CHECK(v.c3 == doctest::Approx(0.04));
  CHECK(v.c1 == doctest::Approx(2.0));
  CHECK(v.c4 == 0.0);

  CHECK_THROWS(lyapunov_coeffs(Regime::vr_only, 0.1, 1, 1, 4, 0.0, 1, 0, 1));
  CHECK_THROWS(lyapunov_coeffs(Regime::gt_vr, 0.1, 1, 4, 8, 0.5, 0, 1, 0));
  CHECK_THROWS(lyapunov_coeffs(Regime::gt_vr, 0.1, 1, 4, 8, 0.0, 0, 1, 0.5));
  CHECK_THROWS(lyapunov_coeffs(Regime::non_vr, 0.1, 1, 4, 8, 1.0, 0, 0, 0));
}

TEST_CASE("measure on hand-made states") {
  const auto q = heterogeneous_quadratic();  // x* = 3
  const LyapunovCoeffs c = lyapunov_coeffs(Regime::gt_vr, 0.01, 1, 4, 8, 0.5, 0, 1, 0.5);
  const MeasureContext ctx = make_measure_context(q, reference_optimum(*q), c, DelayedSource::table);
  Matrix at_opt = Matrix::Constant(4, 1, 3.0);
  const Matrix g_opt = [&] {
    Matrix g(8, 1);
    for (Index s = 0; s < 8; ++s) g(s, 0) = q->sample_gradient(s, Vector::Constant(1, 3.0))[0];
    return g;
  }();
  DeviceState st;
  st.xhat = at_opt;
  st.yhat = Matrix::Zero(4, 1);
  st.grad_table = g_opt;
  const IterationMetrics m = measure(st, ctx);
  CHECK(m.f_gap == 0.0);
  CHECK(m.opt_gap == 0.0);
  CHECK(m.consensus_err == 0.0);
  CHECK(m.vr_err == 0.0);
  CHECK(m.delayed_vr_err == 0.0);
  CHECK(m.gt_err == 0.0);
  CHECK(m.lyapunov == 0.0);

  const IterationMetrics t = measure_terms((Matrix(2, 1) << 0, 2).finished(), Matrix::Zero(2, 1), 0, 0,
                                           make_measure_context(make_quadratic(Matrix::Zero(2, 1), 2, 1, 0), Vector::Zero(1), {}, DelayedSource::none));
  CHECK(t.consensus_err == 2.0);
  CHECK(t.opt_gap == 1.0);
}

TEST_CASE("Lyapunov value is the weighted sum of terms") {
  AlgorithmSetup setup = equivalence_setup(Preset::gt_saga);
  const auto pr = resolve_parameters(setup);
  const LyapunovCoeffs c = lyapunov_coeffs(Regime::gt_vr, setup.alpha, setup.problem->smoothness().L, 4, 24,
                                           pr.rho_rw, pr.r, pr.p, pr.q);
  const MeasureContext ctx = make_measure_context(setup.problem, reference_optimum(*setup.problem), c, DelayedSource::table);
  const Stepper st(setup);
  const DrawGenerator draws = st.draws(2);
  DeviceState s = st.init(Vector::Constant(3, 0.5), draws.mask_at(0));
  for (int k = 0; k < 37; ++k) st.advance(s, draws.draw(k, *s.mask));
  const IterationMetrics m = measure(s, ctx);
  const double sum = c.c0 * m.opt_gap + c.c1 * m.consensus_err + c.c3 * m.vr_err + c.c4 * m.gt_err;
  CHECK(std::abs(m.lyapunov - sum) <= 1e-12 * sum);
  CHECK(m.opt_gap >= 0);
  CHECK(m.gt_err > 0);
}

TEST_CASE("reference and reduced measurements agree") {
  for (Preset p : all_presets()) {
    AlgorithmSetup setup = equivalence_setup(p);
    setup.options.track_gradient_table = true;
    const MeasureContext ctx =
        make_measure_context(setup.problem, reference_optimum(*setup.problem), {}, delayed_source_of(p));
    const Stepper st(setup);
    const DrawGenerator draws = st.draws(6);
    const Vector x0 = Vector::Constant(3, 0.5);
    AugmentedState ref = init_state(*setup.problem, x0);
    ref.mask = draws.mask_at(0);
    DeviceState red = st.init(x0, *ref.mask);
    for (int k = 0; k <= 60; ++k) {
      if (k % 10 == 0) {
        const IterationMetrics a = measure(ref, ctx), b = measure(red, ctx);
        CHECK_MESSAGE(same(a.f_gap, b.f_gap, 1e-9), preset_name(p));
        CHECK_MESSAGE(same(a.opt_gap, b.opt_gap, 1e-9), preset_name(p));
        CHECK_MESSAGE(same(a.consensus_err, b.consensus_err, 1e-9), preset_name(p));
        CHECK_MESSAGE(same(a.vr_err, b.vr_err, 1e-9), preset_name(p));
        CHECK_MESSAGE(same(a.delayed_vr_err, b.delayed_vr_err, 1e-9), preset_name(p));
        CHECK_MESSAGE(same(a.gt_err, b.gt_err, 1e-9), preset_name(p));
      }
      if (k == 60) break;
      const IterationDraw d = draws.draw(k, *ref.mask);
      advance(ref, d, setup.alpha, *setup.problem);
      st.advance(red, d);
    }
  }
}

TEST_CASE("untracked VR terms are NaN and stay out of T") {
  const AlgorithmSetup setup = equivalence_setup(Preset::dsgd);
  const MeasureContext ctx = make_measure_context(setup.problem, reference_optimum(*setup.problem),
                                                  lyapunov_coeffs(Regime::non_vr, 0.05, 1, 4, 24, 0.5, 0, 0, 0),
                                                  DelayedSource::none);
  const Stepper st(setup);
  const DeviceState s = st.init(Vector::Zero(3), st.draws(0).mask_at(0));
  const IterationMetrics m = measure(s, ctx);
  CHECK(std::isnan(m.vr_err));
  CHECK(std::isnan(m.delayed_vr_err));
  CHECK(std::isfinite(m.lyapunov));
}

TEST_CASE("rate fit") {
  std::vector<std::pair<double, double>> geo, flat;
  for (int k = 0; k < 80; ++k) {
    geo.emplace_back(k, std::pow(0.5, k));
    flat.emplace_back(k, 3.0);
  }
  const RateFit g = rate_fit(geo);
  CHECK(g.rate == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.points < 80);  // the tail below the floor is dropped
  CHECK(rate_fit(flat).rate == doctest::Approx(1.0));
  CHECK_THROWS(rate_fit(std::span(geo).first(5)));
  std::vector<std::pair<double, double>> floor(20, {0, 1.0});
  for (int k = 1; k < 20; ++k) floor[k] = {k, 1e-300};
  CHECK_THROWS_AS(rate_fit(floor), std::domain_error);
  CHECK(rate_fit(geo, {.burn_in = 10}).rate == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("seed-averaged T decays monotonically up to the predicted floor") {
  const auto q = heterogeneous_quadratic();
  const MixingMatrix ring = build_mixing(GraphKind::ring_directed, 4);
  const Smoothness sm = q->smoothness();
  const auto hc = problem_constants(*q);
  std::vector<std::uint64_t> seeds(20);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = 100 + i;
  for (Preset p : {Preset::dsgd, Preset::d_saga, Preset::gt_saga}) {
    AlgorithmSetup setup{p, schedule_for(p, ring, 0.0), q, 0.0, {.batch = 1}};
    const Regime regime = regime_of(p);
    const auto pr = resolve_parameters(setup);
    const double rho = pr.rho_rw, a = setup.alpha = max_stepsize(stepsize_regime(regime, false), sm.L, rho);
    double contraction = 0, constant = 0;
    switch (regime) {
      case Regime::non_vr:
        contraction = std::min(a * sm.mu, (1 - rho) / 8);
        constant = 2 * a * a * hc.sigma_star / 4 +
                   16 * a * a * a * sm.L * rho / (1 - rho) * (4 * hc.zeta_star / (1 - rho) + hc.sigma_star);
        break;
      case Regime::vr_only:
        contraction = std::min({a * sm.mu, pr.p * pr.q / 2, (1 - rho) / 8});
        constant = 80 * a * a * a * sm.L * rho / ((1 - rho) * (1 - rho)) * hc.zeta_star;
        break;
      case Regime::gt_vr: contraction = std::min({a * sm.mu, pr.q / 2, (1 - rho) / 8}); break;
    }
    const LyapunovCoeffs c = lyapunov_coeffs(regime, a, sm.L, 4, 8, rho, pr.r, pr.p, pr.q);
    const MeasureContext ctx = make_measure_context(q, hc.x_star, c, delayed_source_of(p));
    const auto every = static_cast<std::int64_t>(std::ceil(1.0 / contraction));
    const AveragedRun run = average_over_seeds(Stepper(setup), ctx, seeds, 12 * every, every, Vector::Zero(1));
    const double floor = 2 * constant / contraction;  // expectation floor, doubled for 20-seed noise
    for (std::size_t i = 2; i < run.mean.size(); ++i)
      CHECK_MESSAGE(run.mean[i].lyapunov <= std::max(run.mean[i - 1].lyapunov * (1 + 1e-9), floor), preset_name(p));
    CHECK(run.mean.back().lyapunov < run.mean.front().lyapunov);
  }
}

TEST_CASE("trajectory CSV schema") {
  Trajectory t;
  t.records.push_back({0, {1, 2, 3, 4, 5, 6, 7}, 0.0});
  t.records.push_back({5, {0.1, 0.2, 0.3, std::nan(""), 0.5, 0.6, 1.0 / 3}, 0.0});
  std::ostringstream out;
  write_trajectory_csv(t, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "k,f_gap,opt_gap,consensus_err,vr_err,delayed_vr_err,gt_err,lyapunov");
  std::getline(in, line);
  CHECK(line == "0,1,2,3,4,5,6,7");
  std::getline(in, line);
  CHECK(line.find("0.33333333333333331") != std::string::npos);
  CHECK(line.find("nan") != std::string::npos);
}
