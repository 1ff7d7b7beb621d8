#include "doctest.h"
#include "oracle.hpp"

#include "spp/rng.hpp"
#include "spp/topology.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace spp;

namespace {

void require_doubly_stochastic(const MixingMatrix& w) {
  const auto& a = w.weights();
  CHECK((a.array() >= 0).all());
  CHECK((a.rowwise().sum().array() - 1).abs().maxCoeff() < 1e-12);
  CHECK((a.colwise().sum().array() - 1).abs().maxCoeff() < 1e-12);
}

}  // namespace

TEST_CASE("complete and identity graphs") {
  const MixingMatrix j = build_mixing(GraphKind::complete, 4);
  CHECK((j.weights().array() == 0.25).all());
  CHECK(j.is_averaging());
  const MixingMatrix i = build_mixing(GraphKind::identity, 3);
  CHECK(i.weights() == Eigen::MatrixXd::Identity(3, 3));
  CHECK(i.is_identity());
}

TEST_CASE("lazy directed ring") {
  const MixingMatrix w = build_mixing(GraphKind::ring_directed, 8);
  require_doubly_stochastic(w);
  for (Index i = 0; i < 8; ++i) {
    CHECK(w(i, i) == 0.5);
    CHECK(w(i, (i + 1) % 8) == 0.5);
  }
  // the squared definition, vs cos(pi/8) ~ 0.924 unsquared
  const double unsquared = std::cos(std::numbers::pi / 8);
  CHECK(spectral_norm(w) == doctest::Approx(unsquared).epsilon(1e-12));
  CHECK(spectral_gap(w) == doctest::Approx(unsquared * unsquared).epsilon(1e-12));
  CHECK(spectral_gap(w) == doctest::Approx(0.853553).epsilon(1e-6));
  CHECK(spectral_norm(w) == doctest::Approx(0.92).epsilon(0.01));
}

TEST_CASE("spectral gap against a power-iteration oracle") {
  CHECK(spectral_gap(MixingMatrix::averaging(4)) == 0.0);
  CHECK(spectral_gap(MixingMatrix::identity(8)) == doctest::Approx(1.0).epsilon(1e-14));
  for (auto [kind, n] : {std::pair{GraphKind::ring_directed, Index{8}}, {GraphKind::exponential, Index{50}},
                         {GraphKind::exponential, Index{16}}, {GraphKind::ring_directed, Index{5}}}) {
    const MixingMatrix w = build_mixing(kind, n);
    const Eigen::MatrixXd a = w.weights() - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    const double s = oracle::power_norm(a);
    CHECK(std::abs(spectral_gap(w) - s * s) < 1e-10);
  }
}

TEST_CASE("spectral gap is permutation invariant") {
  const MixingMatrix w = build_mixing(GraphKind::exponential, 12);
  Eigen::PermutationMatrix<Eigen::Dynamic> p(12);
  p.setIdentity();
  Stream rng = make_stream(3, 0, Purpose::data);
  std::shuffle(p.indices().data(), p.indices().data() + 12, rng);
  const MixingMatrix pw(Eigen::MatrixXd(p * w.weights() * p.transpose()));
  CHECK(spectral_gap(pw) == doctest::Approx(spectral_gap(w)).epsilon(1e-12));
}

TEST_CASE("exponential and geometric graphs") {
  const MixingMatrix e = build_mixing(GraphKind::exponential, 50);
  require_doubly_stochastic(e);
  CHECK(e.weights() == e.weights().transpose());
  CHECK(spectral_gap(e) < 1.0);
  CHECK(spectral_gap(e) > 0.3);

  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const MixingMatrix g = build_mixing(GraphKind::geometric, 20, {.radius = 0.4, .seed = seed});
    require_doubly_stochastic(g);
    CHECK(spectral_gap(g) < 1.0);
  }
  CHECK(build_mixing(GraphKind::geometric, 20, {.radius = 0.4, .seed = 9}).weights() ==
        build_mixing(GraphKind::geometric, 20, {.radius = 0.4, .seed = 9}).weights());
  CHECK_THROWS_AS(build_mixing(GraphKind::geometric, 30, {.radius = 0.01, .seed = 1, .max_attempts = 4}),
                  std::runtime_error);
  CHECK_THROWS(build_mixing(GraphKind::geometric, 5, {.radius = 0.0}));
  CHECK_THROWS(build_mixing(GraphKind::ring_directed, 0));
}

TEST_CASE("mixing matrix validation") {
  Eigen::MatrixXd bad(2, 2);
  bad << 0.7, 0.3, 0.4, 0.6;  // row stochastic only
  CHECK_THROWS_AS(MixingMatrix{bad}, std::logic_error);
  bad << 1.5, -0.5, -0.5, 1.5;
  CHECK_THROWS(MixingMatrix{bad});
}

TEST_CASE("expected contraction") {
  CHECK(expected_contraction(0.92, 0) == 0.92);
  CHECK(expected_contraction(0.92, 1) == 0.0);
  CHECK(expected_contraction(0.92, 0.05) == doctest::Approx(0.874).epsilon(1e-12));
  CHECK(expected_contraction(1.0, 0.0) == 1.0);
  CHECK_THROWS_AS(expected_contraction(1.0, 0.0, true), std::domain_error);
  CHECK_THROWS(expected_contraction(0.5, 1.5));
}

TEST_CASE("random schedule frequency of global averaging") {
  const MixingSchedule s(build_mixing(GraphKind::ring_directed, 4), 0.05);
  const int N = 100000;
  int hits = 0;
  for (int k = 0; k < N; ++k) hits += s.draws_average(k, 42);
  const double freq = static_cast<double>(hits) / N;
  CHECK(std::abs(freq - 0.05) <= 3 * std::sqrt(0.05 * 0.95 / N));
  CHECK(s.rho_rw() == doctest::Approx(0.95 * s.rho_w()));
  // W_k is the base or J, never anything else
  for (int k = 0; k < 50; ++k) {
    const auto& w = *s.draw(k, 42);
    CHECK((w.is_averaging() || w.weights() == s.base().weights()));
  }
}

TEST_CASE("periodic schedule starts at k = 0") {
  const MixingSchedule s(build_mixing(GraphKind::ring_directed, 4), 0.3, ScheduleMode::periodic);
  CHECK(s.period() == 4);  // ceil(1/0.3)
  for (int k = 0; k < 12; ++k) CHECK(s.draws_average(k, 0) == (k % 4 == 0));
  const MixingSchedule fixed(build_mixing(GraphKind::ring_directed, 4), 0.0, ScheduleMode::periodic);
  for (int k = 0; k < 12; ++k) CHECK_FALSE(fixed.draws_average(k, 0));
}

TEST_CASE("CSV round trip is exact") {
  const MixingMatrix w = build_mixing(GraphKind::exponential, 7);
  std::stringstream ss;
  write_csv(w, ss);
  CHECK(read_mixing_csv(ss).weights() == w.weights());
}

TEST_CASE("graph kind names") {
  for (auto k : {GraphKind::complete, GraphKind::identity, GraphKind::ring_directed, GraphKind::exponential,
                 GraphKind::geometric})
    CHECK(parse_graph_kind(to_string(k)) == k);
  CHECK_THROWS(parse_graph_kind("torus"));
}
