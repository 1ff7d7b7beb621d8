#include "doctest.h"

#include "spp/reference.hpp"
#include "spp/verification.hpp"

using namespace spp;

namespace {

std::shared_ptr<const QuadraticObjective> four_sample() {
  Matrix a(4, 1);
  a << 0, 2, 4, 6;
  return make_quadratic(a, 2, 2, 0.0);
}

std::shared_ptr<const QuadraticObjective> scalar_half_square() { return make_quadratic(Matrix::Zero(1, 1), 1, 1, 0.0); }

MeasureContext context(const AlgorithmSetup& s) {
  return make_measure_context(s.problem, reference_optimum(*s.problem), {}, delayed_source_of(s.preset));
}

double max_abs(const Matrix& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("initial state") {
  const auto f = scalar_half_square();
  const AugmentedState s = init_state(*f, Vector::Ones(1));
  CHECK(s.X(0, 0) == 1.0);
  CHECK(s.Y(0, 0) == 1.0);

  const auto q = four_sample();
  const AugmentedState t = init_state(*q, Vector::Zero(1));
  CHECK(t.Y.col(0) == (Vector(4) << 0, -2, -4, -6).finished());
  CHECK(tracking_violation(t) == 0.0);
  CHECK_THROWS(init_state(*q, Vector::Zero(2)));
}

TEST_CASE("one step of plain gradient descent") {
  const auto f = scalar_half_square();
  const AlgorithmSetup setup{Preset::saga, schedule_for(Preset::saga, MixingMatrix::identity(1), 1.0), f, 0.1,
                             {.batch = 1}};
  const DrawGenerator draws = make_draws(setup, 0);
  AugmentedState s = init_state(*f, Vector::Ones(1));
  s.mask = draws.mask_at(0);
  advance(s, draws.draw(0, *s.mask), 0.1, *f);
  CHECK(s.X(0, 0) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s.k == 1);
}

TEST_CASE("rows not selected next keep their value") {
  const auto q = four_sample();
  const AlgorithmSetup setup{Preset::dsgd, schedule_for(Preset::dsgd, build_mixing(GraphKind::ring_directed, 2), 0.0),
                             q, 0.1, {.batch = 1}};
  const DrawGenerator draws = make_draws(setup, 3);
  AugmentedState s = init_state(*q, Vector::Ones(1));
  s.mask = draws.mask_at(0);
  for (int k = 0; k < 30; ++k) {
    const IterationDraw d = draws.draw(k, *s.mask);
    const Matrix before = s.X;
    advance(s, d, 0.1, *q);
    for (Index r = 0; r < 4; ++r)
      if (!d.next_mask.contains(r)) CHECK(s.X(r, 0) == before(r, 0));
  }
}

TEST_CASE("draw bookkeeping is checked") {
  const auto q = four_sample();
  const AlgorithmSetup setup{Preset::dsgd, schedule_for(Preset::dsgd, build_mixing(GraphKind::ring_directed, 2), 0.0),
                             q, 0.1, {.batch = 1}};
  const DrawGenerator draws = make_draws(setup, 3);
  AugmentedState s = init_state(*q, Vector::Ones(1));
  s.mask = draws.mask_at(0);
  CHECK_THROWS(advance(s, draws.draw(1), 0.1, *q));
}

TEST_CASE("zero step size leaves X fixed") {
  const auto q = four_sample();
  const AlgorithmSetup setup{Preset::gt_saga, schedule_for(Preset::gt_saga, build_mixing(GraphKind::ring_directed, 2), 0.0),
                             q, 0.0, {.batch = 1}};
  const DrawGenerator draws = make_draws(setup, 1);
  AugmentedState s = init_state(*q, Vector::Constant(1, 0.7));
  s.mask = draws.mask_at(0);
  for (int k = 0; k < 50; ++k) advance(s, draws.draw(k, *s.mask), 0.0, *q);
  CHECK((s.X.array() == 0.7).all());
}

TEST_CASE("run guards") {
  const AlgorithmSetup setup = equivalence_setup(Preset::dsgd);
  const MeasureContext ctx = context(setup);
  CHECK_THROWS(run_reference(setup, ctx, {.iterations = 0, .x0 = Vector::Zero(3)}));
  CHECK_THROWS(run_reference(setup, ctx, {.iterations = 5, .eval_every = 0, .x0 = Vector::Zero(3)}));
}

TEST_CASE("divergence carries the iteration") {
  const auto q = four_sample();
  const AlgorithmSetup setup{Preset::dsgd, schedule_for(Preset::dsgd, build_mixing(GraphKind::ring_directed, 2), 0.0),
                             q, 1e200, {.batch = 2}};
  Trajectory t;
  try {
    run_reference(setup, context(setup), {.iterations = 100, .x0 = Vector::Ones(1)}, t);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.iteration() >= 1);
    CHECK(e.iteration() <= 100);
    CHECK(!t.records.empty());
  }
}

TEST_CASE("centralized full batch reduces to gradient descent") {
  const auto q = four_sample();
  for (Preset p : {Preset::gt_saga, Preset::d_saga, Preset::dsgd}) {
    const AlgorithmSetup setup{p, schedule_for(p, MixingMatrix::averaging(2), 0.0), q, 0.3, {.batch = 2}};
    const DrawGenerator draws = make_draws(setup, 2);
    AugmentedState s = init_state(*q, Vector::Constant(1, -1.0));
    s.mask = draws.mask_at(0);
    double xbar = -1.0;
    for (int k = 0; k < 40; ++k) {
      advance(s, draws.draw(k, *s.mask), 0.3, *q);
      xbar -= 0.3 * q->gradient(Vector::Constant(1, xbar))[0];
      CHECK(std::abs(projected_x(s).mean() - xbar) < 1e-12);
    }
  }
}

TEST_CASE("GT-SAGA reference vs reduced on the 4-sample quadratic, 10 steps") {
  const auto q = four_sample();
  const AlgorithmSetup setup{Preset::gt_saga, schedule_for(Preset::gt_saga, build_mixing(GraphKind::ring_directed, 2), 0.0),
                             q, 0.1, {.batch = 1}};
  const Stepper stepper(setup);
  const DrawGenerator draws = stepper.draws(8);
  AugmentedState ref = init_state(*q, Vector::Zero(1));
  ref.mask = draws.mask_at(0);
  DeviceState red = stepper.init(Vector::Zero(1), *ref.mask);
  for (int k = 0; k < 10; ++k) {
    const IterationDraw d = draws.draw(k, *ref.mask);
    advance(ref, d, 0.1, *q);
    stepper.advance(red, d);
    CHECK(max_abs(red.xhat - projected_x(ref)) < 1e-12);
    CHECK(max_abs(red.yhat - projected_y(ref)) < 1e-12);
  }
}

TEST_CASE("DSGD reference and reduced runs agree over 500 steps") {
  const AlgorithmSetup setup = equivalence_setup(Preset::dsgd);
  const MeasureContext ctx = context(setup);
  const RunOptions opts{.iterations = 500, .eval_every = 50, .seed = 4, .x0 = Vector::Constant(3, 0.5)};
  const Trajectory a = run_reference(setup, ctx, opts);
  const Trajectory b = run_reduced(Stepper(setup), ctx, opts);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].k == b.records[i].k);
    CHECK(std::abs(a.records[i].metrics.consensus_err - b.records[i].metrics.consensus_err) < 1e-12);
    CHECK(std::abs(a.records[i].metrics.opt_gap - b.records[i].metrics.opt_gap) < 1e-12);
  }
}

TEST_CASE("reference engine accepts arbitrary draw sequences") {
  const auto q = four_sample();
  AugmentedState s = init_state(*q, Vector::Constant(1, 2.0));
  s.mask = SampleMask(2, 2, 1, {0, 1});
  const auto ring = std::make_shared<const MixingMatrix>(build_mixing(GraphKind::ring_directed, 2));
  Stream rng = make_stream(1, 0, Purpose::data);
  for (int k = 0; k < 200; ++k) {
    const Index b = std::uniform_int_distribution<Index>(1, 2)(rng);
    const Index bn = std::uniform_int_distribution<Index>(1, 2)(rng);
    SampleMask cur = *s.mask;
    if (cur.batch() != b) cur = draw_mask(2, 2, b, rng);
    s.mask = cur;
    IterationDraw d{k, cur, draw_mask(2, 2, bn, rng), uniform01(rng) < 0.5 ? ring : std::make_shared<const MixingMatrix>(MixingMatrix::averaging(2)),
                    uniform01(rng) < 0.5 ? TrackingChoice::identity : TrackingChoice::mixing,
                    uniform01(rng) < 0.5 ? LocalChoice::identity : LocalChoice::averaging};
    advance(s, d, 0.05, *q);
    CHECK(tracking_violation(s) < 1e-12);
  }
}
