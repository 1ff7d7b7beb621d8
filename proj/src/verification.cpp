#include "spp/verification.hpp"

#include "spp/datasplit.hpp"
#include "spp/reference.hpp"
#include "spp/rng.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace spp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Matrix gaussian_matrix(Index rows, Index cols, Stream& rng, double scale = 1.0) {
  Matrix a(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) a(i, j) = scale * standard_normal(rng);
  return a;
}

// Device offsets plus within-device noise; n*m x d.
Matrix heterogeneous_anchors(Index n, Index m, Index d, std::uint64_t seed) {
  Stream rng = make_stream(seed, 0, Purpose::data);
  const Matrix offsets = gaussian_matrix(n, d, rng, 2.0);
  Matrix a(n * m, d);
  for (Index s = 0; s < n * m; ++s) a.row(s) = offsets.row(s / m) + gaussian_matrix(1, d, rng).row(0);
  return a;
}

MixingMatrix lazy_ring4() { return build_mixing(GraphKind::ring_directed, 4); }

MeasureContext context_for(const AlgorithmSetup& setup) {
  const auto params = resolve_parameters(setup);
  const auto& f = *setup.problem;
  const Smoothness sm = f.smoothness();
  LyapunovCoeffs c;
  const Regime regime = regime_of(setup.preset);
  if (!(regime == Regime::gt_vr && params.rho_rw == 0.0))
    c = lyapunov_coeffs(regime, setup.alpha, sm.L, f.devices(), f.total_samples(), params.rho_rw,
                        params.r, params.p, params.q);
  return make_measure_context(setup.problem, reference_optimum(f), c, delayed_source_of(setup.preset));
}

double max_abs(const Matrix& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

double inf_norm(const Eigen::MatrixXd& a) { return a.cwiseAbs().rowwise().sum().maxCoeff(); }

}  // namespace

AveragedRun average_over_seeds(const Stepper& stepper, const MeasureContext& ctx,
                               const std::vector<std::uint64_t>& seeds, std::int64_t K,
                               std::int64_t eval_every, const Vector& x0, double stop_factor) {
  std::vector<DrawGenerator> gens;
  std::vector<DeviceState> states;
  for (auto s : seeds) {
    gens.push_back(stepper.draws(s));
    states.push_back(stepper.init(x0, gens.back().mask_at(0)));
  }
  AveragedRun out;
  const double w = 1.0 / static_cast<double>(seeds.size());
  double t0 = 0.0;
  for (std::int64_t k = 0;; ++k) {
    if (k % eval_every == 0 || k == K) {
      IterationMetrics avg{0, 0, 0, 0, 0, 0, 0};
      for (const auto& st : states) {
        const IterationMetrics m = measure(st, ctx);
        avg.f_gap += w * m.f_gap;
        avg.opt_gap += w * m.opt_gap;
        avg.consensus_err += w * m.consensus_err;
        avg.vr_err += w * m.vr_err;
        avg.delayed_vr_err += w * m.delayed_vr_err;
        avg.gt_err += w * m.gt_err;
        avg.lyapunov += w * m.lyapunov;
      }
      if (k == 0) t0 = avg.lyapunov;
      out.k.push_back(k);
      out.mean.push_back(avg);
      if (stop_factor > 0.0 && avg.lyapunov <= stop_factor * t0) {
        out.hit = k;
        break;
      }
    }
    if (k == K) break;
    for (std::size_t i = 0; i < states.size(); ++i) stepper.advance(states[i], gens[i].draw(k, *states[i].mask));
  }
  return out;
}

std::shared_ptr<const QuadraticObjective> heterogeneous_quadratic() {
  Matrix a(8, 1);
  a << 0, 2, 4, 6, 0, 2, 4, 6;
  return make_quadratic(std::move(a), 4, 2, 0.0);
}

AlgorithmSetup equivalence_setup(Preset preset) {
  const Index n = 4, m = 6, d = 3;
  const Matrix anchors = heterogeneous_anchors(n, m, d, 7);
  const bool central = centralized(preset);
  auto problem = central ? make_quadratic(anchors, 1, n * m, 0.1) : make_quadratic(anchors, n, m, 0.1);
  const MixingMatrix base = central ? MixingMatrix::identity(1) : lazy_ring4();
  StepperOptions opts;
  opts.batch = central ? 6 : 2;
  opts.p = 0.2;
  return AlgorithmSetup{preset, schedule_for(preset, base, 0.2), problem, 0.05, opts};
}

// 1 -------------------------------------------------------------------------
CriterionResult check_equivalence() {
  const auto t0 = Clock::now();
  CriterionResult res{.id = 1, .name = "reference/reduced equivalence, 12 presets, K=200"};
  const std::int64_t K = 200;
  double worst = 0.0;
  std::string worst_name;
  for (Preset preset : all_presets()) {
    const AlgorithmSetup setup = equivalence_setup(preset);
    const Stepper stepper(setup);
    const DrawGenerator draws = stepper.draws(11);
    const Vector x0 = Vector::Constant(setup.problem->dim(), 0.5);
    AugmentedState ref = init_state(*setup.problem, x0);
    ref.mask = draws.mask_at(0);
    DeviceState red = stepper.init(x0, *ref.mask);
    double err = 0.0;
    for (std::int64_t k = 0; k <= K; ++k) {
      err = std::max({err, max_abs(red.xhat - projected_x(ref)), max_abs(red.yhat - projected_y(ref))});
      if (k == K) break;
      const IterationDraw draw = draws.draw(k, *ref.mask);
      advance(ref, draw, setup.alpha, *setup.problem);
      stepper.advance(red, draw);
    }
    if (err >= worst) {
      worst = err;
      worst_name = std::string(preset_name(preset));
    }
  }
  res.seconds = seconds_since(t0);
  res.passed = worst < 1e-9 && res.seconds < 10.0;
  res.detail = "max |Xhat - S X|, |Yhat - S Y| = " + fmt("%.3g", worst) + " (" + worst_name + "), " +
               fmt("%.2f", res.seconds) + " s";
  return res;
}

// 2 -------------------------------------------------------------------------
CriterionResult check_matrix_laws() {
  const auto t0 = Clock::now();
  CriterionResult res{.id = 2, .name = "matrix laws over 1e4 random draws"};
  double row_err = 0, c_err = 0, commute_r = 0, commute_g = 0;
  bool lambda_ok = true;
  for (std::uint64_t trial = 0; trial < 10000; ++trial) {
    Stream rng = make_stream(2024, trial, Purpose::data);
    const Index n = std::uniform_int_distribution<Index>(1, 4)(rng);
    const Index m = std::uniform_int_distribution<Index>(1, 5)(rng);
    const Index b0 = std::uniform_int_distribution<Index>(1, m)(rng);
    const Index b1 = std::uniform_int_distribution<Index>(1, m)(rng);
    // Birkhoff mixture of three random permutations
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    double wsum = 0;
    double weights[3];
    for (double& x : weights) wsum += (x = uniform01(rng) + 0.05);
    for (double x : weights) {
      std::vector<Index> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      for (Index i = 0; i < n; ++i) w(i, perm[i]) += x / wsum;
    }
    IterationDraw draw{static_cast<std::int64_t>(trial), draw_mask(n, m, b0, rng), draw_mask(n, m, b1, rng),
                       std::make_shared<const MixingMatrix>(w),
                       uniform01(rng) < 0.5 ? TrackingChoice::identity : TrackingChoice::mixing,
                       uniform01(rng) < 0.5 ? LocalChoice::identity : LocalChoice::averaging};
    const SparseMatrix gamma = build_gamma(draw);
    const SparseMatrix r = build_row_mixing(draw, gamma);
    const Eigen::MatrixXd c = Eigen::MatrixXd(build_correction(draw).matrix());
    const Eigen::MatrixXd rd = Eigen::MatrixXd(r);
    row_err = std::max(row_err, (rd.rowwise().sum().array() - 1.0).abs().maxCoeff());
    c_err = std::max({c_err, (c.rowwise().sum().array() - 1.0).abs().maxCoeff(),
                      (c.colwise().sum().array() - 1.0).abs().maxCoeff()});
    const Eigen::MatrixXd s0 = Eigen::MatrixXd(build_projection(draw.mask));
    const Eigen::MatrixXd s1 = Eigen::MatrixXd(build_projection(draw.next_mask));
    const Eigen::MatrixXd ws0 = w * s0;
    commute_r = std::max(commute_r, inf_norm(s1 * rd - ws0));
    commute_g = std::max(commute_g, inf_norm(s1 * Eigen::MatrixXd(gamma) - ws0));
    for (auto e : draw.mask.indicator()) lambda_ok &= static_cast<double>(e) * (1.0 - static_cast<double>(e)) == 0.0;
  }
  res.seconds = seconds_since(t0);
  res.passed = row_err < 1e-12 && c_err < 1e-12 && commute_r < 1e-12 && commute_g < 1e-12 && lambda_ok;
  res.detail = "R rows " + fmt("%.2g", row_err) + ", C rows/cols " + fmt("%.2g", c_err) + ", |S'R-WS| " +
               fmt("%.2g", commute_r) + ", |S'G-WS| " + fmt("%.2g", commute_g) +
               (lambda_ok ? ", L(I-L)=0" : ", L(I-L)!=0");
  return res;
}

// 3 -------------------------------------------------------------------------
CriterionResult check_projection_spectrum() {
  const auto t0 = Clock::now();
  CriterionResult res{.id = 3, .name = "top eigenvalue of E[S^T S] <= 1/m + 3 se"};
  res.passed = true;
  const Index cases[3][3] = {{2, 4, 2}, {3, 6, 1}, {1, 8, 4}};
  const int batches = 100, per_batch = 1000;
  for (const auto& cs : cases) {
    const Index n = cs[0], m = cs[1], b = cs[2];
    const Index M = n * m;
    std::vector<Eigen::MatrixXd> batch_means;
    for (int bt = 0; bt < batches; ++bt) {
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(M, M);
      for (int t = 0; t < per_batch; ++t) {
        Stream rng = make_stream(99, static_cast<std::uint64_t>(bt * per_batch + t), Purpose::mask);
        const SparseMatrix S = build_projection(draw_mask(n, m, b, rng));
        acc += Eigen::MatrixXd(SparseMatrix(S.transpose() * S));
      }
      batch_means.push_back(acc / per_batch);
    }
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(M, M);
    for (const auto& e : batch_means) mean += e / batches;
    const double top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(mean).eigenvalues().maxCoeff();
    // Weyl: |top(E_hat) - top(E)| <= ||E_hat - E||_F; its std-err from per-entry batch means.
    // A scalar batch-means se of the top eigenvalue misses the upward bias of a max over a
    // degenerate spectrum (b = 1 makes E[S^T S] = I/m).
    double frob_var = 0;
    for (const auto& e : batch_means) frob_var += (e - mean).squaredNorm();
    const double se = std::sqrt(frob_var / (batches - 1) / batches);
    const double bound = 1.0 / static_cast<double>(m);
    const bool ok = top <= bound + 3 * se;
    res.passed &= ok;
    res.detail += "(" + std::to_string(n) + "," + std::to_string(m) + "," + std::to_string(b) + "): " +
                  fmt("%.6f", top) + " vs " + fmt("%.6f", bound) + "+3*" + fmt("%.1e", se) + "; ";
  }
  res.seconds = seconds_since(t0);
  return res;
}

// 4 -------------------------------------------------------------------------
CriterionResult check_tracking_invariant() {
  const auto t0 = Clock::now();
  CriterionResult res{.id = 4, .name = "tracking invariant on every preset, K=500"};
  double worst = 0;
  for (Preset preset : all_presets()) {
    const AlgorithmSetup setup = equivalence_setup(preset);
    const DrawGenerator draws = make_draws(setup, 5);
    AugmentedState st = init_state(*setup.problem, Vector::Constant(setup.problem->dim(), 0.5));
    st.mask = draws.mask_at(0);
    for (std::int64_t k = 0; k < 500; ++k) {
      advance(st, draws.draw(k, *st.mask), setup.alpha, *setup.problem);
      worst = std::max(worst, tracking_violation(st));
    }
  }
  res.seconds = seconds_since(t0);
  res.passed = worst <= 1e-9;
  res.detail = "max relative violation " + fmt("%.3g", worst);
  return res;
}

// 5 -------------------------------------------------------------------------
CriterionResult check_gt_linear_rate() {
  const auto t0 = Clock::now();
  CriterionResult res{.id = 5, .name = "GT+VR exact linear convergence"};
  res.passed = true;
  const auto problem = heterogeneous_quadratic();
  std::vector<std::uint64_t> seeds(20);
  std::iota(seeds.begin(), seeds.end(), 1);
  for (Preset preset : {Preset::gt_saga, Preset::pga_gt_saga}) {
    StepperOptions opts;
    opts.batch = 1;
    AlgorithmSetup setup{preset, schedule_for(preset, lazy_ring4(), 0.2), problem, 0.0, opts};
    const auto pr = resolve_parameters(setup);
    const Smoothness sm = problem->smoothness();
    setup.alpha = max_stepsize(StepsizeRegime::gt_vr, sm.L, pr.rho_rw);
    const double contraction = std::min({setup.alpha * sm.mu, pr.q / 2, (1 - pr.rho_rw) / 8});
    const auto budget = static_cast<std::int64_t>(std::ceil(20 * std::log(1e12) / contraction));
    const MeasureContext ctx = context_for(setup);
    const AveragedRun run = average_over_seeds(Stepper(setup), ctx, seeds, budget, 50,
                                               Vector::Zero(1), 1e-12);
    std::vector<std::pair<double, double>> series;
    for (std::size_t i = 0; i < run.k.size(); ++i)
      series.emplace_back(static_cast<double>(run.k[i]), run.mean[i].lyapunov);
    const RateFit fit = rate_fit(series, {series.size() / 10, 1e3});
    const double bound = 1 - contraction + 0.02;
    const bool ok = run.hit >= 0 && fit.rate <= bound;  // the +0.02 slack is part of the requirement
    res.passed &= ok;
    res.detail += std::string(preset_name(preset)) + ": alpha " + fmt("%.3g", setup.alpha) + ", hit " +
                  std::to_string(run.hit) + "/" + std::to_string(budget) + ", rate " + fmt("%.6f", fit.rate) +
                  " (bound " + fmt("%.6f", 1 - contraction) + " + 0.02); ";
  }
  res.seconds = seconds_since(t0);
  return res;
}

// 6 -------------------------------------------------------------------------
CriterionResult check_heterogeneity_contrast() {
  const auto t0 = Clock::now();
  CriterionResult res{.id = 6, .name = "DSGD plateau >= 1e3 x GT-SAGA at alpha=0.05, K=5000"};
  const auto problem = heterogeneous_quadratic();
  std::vector<std::uint64_t> seeds(20);
  std::iota(seeds.begin(), seeds.end(), 1);
  double gap[2];
  int idx = 0;
  for (Preset preset : {Preset::dsgd, Preset::gt_saga}) {
    StepperOptions opts;
    opts.batch = 1;
    AlgorithmSetup setup{preset, schedule_for(preset, lazy_ring4(), 0.0), problem, 0.05, opts};
    const AveragedRun run = average_over_seeds(Stepper(setup), context_for(setup), seeds, 5000, 5000,
                                               Vector::Zero(1));
    gap[idx++] = run.mean.back().opt_gap;
  }
  res.seconds = seconds_since(t0);
  res.passed = gap[0] > 0 && gap[0] >= 1e3 * gap[1];
  res.detail = "final opt_gap DSGD " + fmt("%.3g", gap[0]) + ", GT-SAGA " + fmt("%.3g", gap[1]);
  return res;
}

// 7 -------------------------------------------------------------------------
CriterionResult check_vr_scaling() {
  const auto t0 = Clock::now();
  CriterionResult res{.id = 7, .name = "VR-only linear convergence and m/b scaling"};
  res.passed = true;
  const Index m = 16;
  auto problem = make_quadratic(heterogeneous_anchors(1, m, 3, 31), 1, m, 0.0);
  std::vector<std::uint64_t> seeds(10);
  std::iota(seeds.begin(), seeds.end(), 1);
  for (Preset preset : {Preset::saga, Preset::l_svrg}) {
    double hit[2], pred[2], cplx[2];
    int idx = 0;
    for (Index b : {m / 4, m}) {
      StepperOptions opts;
      opts.batch = b;
      opts.p = static_cast<double>(b) / static_cast<double>(m);
      opts.track_gradient_table = true;
      AlgorithmSetup setup{preset, schedule_for(preset, MixingMatrix::identity(1), 1.0), problem, 1.0 / 64, opts};
      const auto pr = resolve_parameters(setup);
      const Smoothness sm = problem->smoothness();
      // explicit per-step contraction, and the complexity expression (L/mu + 1/(pq)) log(1/eps)
      const double contraction = std::min({setup.alpha * sm.mu, pr.p * pr.q / 2, (1 - pr.rho_rw) / 8});
      pred[idx] = std::log(1e12) / contraction;
      cplx[idx] = sm.L / sm.mu + 1.0 / (pr.p * pr.q);
      const auto budget = static_cast<std::int64_t>(std::ceil(20 * pred[idx]));
      const AveragedRun run = average_over_seeds(Stepper(setup), context_for(setup), seeds, budget, 1,
                                                 Vector::Zero(3), 1e-12);
      hit[idx] = static_cast<double>(run.hit);
      res.passed &= run.hit >= 0;
      res.detail += std::string(preset_name(preset)) + " b=" + std::to_string(b) + ": " +
                    std::to_string(run.hit) + " it (bound " + fmt("%.0f", pred[idx]) + "); ";
      ++idx;
    }
    const double emp = hit[0] / hit[1];
    const double vs_bound = emp / (pred[0] / pred[1]);
    const double vs_cplx = emp / (cplx[0] / cplx[1]);
    res.passed &= vs_bound >= 1.0 / 3 && vs_bound <= 3.0 && vs_cplx >= 1.0 / 3 && vs_cplx <= 3.0;
    res.detail += "N(m/4)/N(m) " + fmt("%.3f", emp) + " vs rate bound " + fmt("%.3f", pred[0] / pred[1]) +
                  ", vs L/mu+m/b " + fmt("%.3f", cplx[0] / cplx[1]) + "; ";
  }
  res.seconds = seconds_since(t0);
  return res;
}

// 8 -------------------------------------------------------------------------
CriterionResult check_convex_rate() {
  const auto t0 = Clock::now();
  CriterionResult res{.id = 8, .name = "convex GT-SAGA: min f_gap ~ C/K"};
  const Index n = 4, m = 4, d = 22;
  Vector h(d);
  for (Index t = 0; t < d - 1; ++t) h[t] = std::pow(10.0, -static_cast<double>(t) / 4.0);
  h[d - 1] = 0.0;  // flat direction: mu = 0
  Matrix anchors = heterogeneous_anchors(n, m, d, 77);
  const Eigen::RowVectorXd mean = anchors.colwise().mean();
  anchors.rowwise() += Eigen::RowVectorXd::Ones(d) - mean;
  auto problem = make_quadratic(std::move(anchors), n, m, 0.0, h);

  StepperOptions opts;
  opts.batch = 2;
  AlgorithmSetup setup{Preset::gt_saga, schedule_for(Preset::gt_saga, lazy_ring4(), 0.0), problem, 0.05, opts};
  const std::int64_t K = 10000;
  const AveragedRun run = average_over_seeds(Stepper(setup), context_for(setup), {1, 2, 3}, K, 1, Vector::Zero(d));

  double running = std::numeric_limits<double>::infinity();
  std::vector<double> best(run.k.size());
  for (std::size_t i = 0; i < run.k.size(); ++i) best[i] = running = std::min(running, run.mean[i].f_gap);
  // log-spaced samples over [1e2, 1e4]
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int j = 0; j <= 40; ++j) {
    const auto k = static_cast<std::size_t>(std::llround(std::pow(10.0, 2.0 + 2.0 * j / 40.0)));
    const double x = std::log(static_cast<double>(k));
    const double y = std::log(best[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  const double slope = (sxy - sx * sy / cnt) / (sxx - sx * sx / cnt);
  res.seconds = seconds_since(t0);
  res.passed = slope >= -1.3 && slope <= -0.7;
  res.detail = "log-log slope " + fmt("%.3f", slope) + ", min f_gap(1e4) " + fmt("%.3g", best[K]);
  return res;
}

// 9 -------------------------------------------------------------------------
CriterionResult check_data_split() {
  const auto t0 = Clock::now();
  CriterionResult res{.id = 9, .name = "label allocation tables"};
  // published n = 8, M = 50000 allocations
  const std::int64_t table_h20[8][10] = {
      {555, 575, 595, 615, 635, 655, 675, 695, 625, 625}, {575, 595, 615, 635, 655, 675, 695, 555, 625, 625},
      {595, 615, 635, 655, 675, 695, 555, 575, 625, 625}, {615, 635, 655, 675, 695, 555, 575, 595, 625, 625},
      {635, 655, 675, 695, 555, 575, 595, 615, 625, 625}, {655, 675, 695, 555, 575, 595, 615, 635, 625, 625},
      {675, 695, 555, 575, 595, 615, 635, 655, 625, 625}, {695, 555, 575, 595, 615, 635, 655, 675, 625, 625}};
  const std::int64_t table_hmax[8][10] = {
      {1000, 0, 0, 0, 1000, 1000, 1000, 1000, 625, 625}, {1000, 1000, 0, 0, 0, 1000, 1000, 1000, 625, 625},
      {1000, 1000, 1000, 0, 0, 0, 1000, 1000, 625, 625}, {1000, 1000, 1000, 1000, 0, 0, 0, 1000, 625, 625},
      {1000, 1000, 1000, 1000, 1000, 0, 0, 0, 625, 625}, {0, 1000, 1000, 1000, 1000, 1000, 0, 0, 625, 625},
      {0, 0, 1000, 1000, 1000, 1000, 1000, 0, 625, 625}, {0, 0, 0, 1000, 1000, 1000, 1000, 1000, 625, 625}};
  bool ok = true;
  std::string why;
  try {
    const LabelAllocation a = allocation_counts(8, 50000, 20, 555);
    const LabelAllocation b = allocation_hmax(8, 50000);
    for (Index i = 0; i < 8; ++i)
      for (int c = 0; c < 10; ++c) {
        ok &= a.count(i, c) == table_h20[i][c];
        ok &= b.count(i, c) == table_hmax[i][c];
      }
    if (!ok) why = "cell mismatch";
    check_constraints(a);
    check_constraints(b);
  } catch (const std::exception& e) {
    ok = false;
    why = e.what();
  }
  res.seconds = seconds_since(t0);
  res.passed = ok;
  res.detail = ok ? "h=20 and h_max tables exact; row sums M/n, column sums M/10" : why;
  return res;
}

// 10 ------------------------------------------------------------------------
CriterionResult check_objective_properties() {
  const auto t0 = Clock::now();
  CriterionResult res{.id = 10, .name = "averaged smoothness + finite-difference gradients"};
  std::vector<std::shared_ptr<const FiniteSumObjective>> problems;
  problems.push_back(make_quadratic(heterogeneous_anchors(3, 5, 4, 3), 3, 5, 0.2));
  {
    Stream rng = make_stream(5, 0, Purpose::data);
    const Index N = 40, p = 5;
    auto features = std::make_shared<const Matrix>(gaussian_matrix(N, p, rng));
    std::vector<int> labels(N);
    for (auto& y : labels) y = std::uniform_int_distribution<int>(0, 9)(rng);
    Partition part(4);
    for (Index r = 0; r < N; ++r) part[r % 4].push_back(r);
    problems.push_back(make_logistic(features, labels, 1e-3, part));
  }
  double worst_slack = -std::numeric_limits<double>::infinity();
  double worst_fd = 0;
  for (const auto& f : problems) {
    const Index d = f->dim(), m = f->samples_per_device();
    const double L = f->smoothness().L;
    Stream rng = make_stream(17, 0, Purpose::data);
    for (int pair = 0; pair < 1000; ++pair) {
      const Vector x = gaussian_matrix(d, 1, rng).col(0);
      const Vector y = gaussian_matrix(d, 1, rng).col(0);
      const Index i = std::uniform_int_distribution<Index>(0, f->devices() - 1)(rng);
      double lhs = 0;
      for (Index j = 0; j < m; ++j)
        lhs += (f->sample_gradient(i * m + j, x) - f->sample_gradient(i * m + j, y)).squaredNorm();
      lhs /= static_cast<double>(m);
      const double rhs = 2 * L * (f->device_value(i, x) - f->device_value(i, y) - f->device_gradient(i, y).dot(x - y));
      worst_slack = std::max(worst_slack, lhs - rhs);
    }
    const double step = 1e-5;
    for (int pt = 0; pt < 5; ++pt) {
      const Vector x = gaussian_matrix(d, 1, rng).col(0);
      for (Index s = 0; s < f->total_samples(); ++s) {
        const Vector g = f->sample_gradient(s, x);
        Vector fd(d);
        for (Index t = 0; t < d; ++t) {
          Vector xp = x, xm = x;
          xp[t] += step;
          xm[t] -= step;
          fd[t] = (f->sample_value(s, xp.data()) - f->sample_value(s, xm.data())) / (2 * step);
        }
        worst_fd = std::max(worst_fd, (g - fd).norm() / std::max(1.0, g.norm()));
      }
    }
  }
  res.seconds = seconds_since(t0);
  res.passed = worst_slack <= 1e-9 && worst_fd < 1e-6;
  res.detail = "max(lhs - rhs) " + fmt("%.3g", worst_slack) + ", max FD rel err " + fmt("%.3g", worst_fd);
  return res;
}

std::vector<CriterionResult> run_acceptance_suite() {
  std::vector<CriterionResult> out;
  for (auto check : {check_equivalence, check_matrix_laws, check_projection_spectrum, check_tracking_invariant,
                     check_gt_linear_rate, check_heterogeneity_contrast, check_vr_scaling, check_convex_rate,
                     check_data_split, check_objective_properties}) {
    try {
      out.push_back(check());
    } catch (const std::exception& e) {
      CriterionResult r{static_cast<int>(out.size()) + 1, "criterion", false, std::string("error: ") + e.what()};
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace spp
