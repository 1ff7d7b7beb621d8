#include "spp/reference.hpp"

#include <chrono>

namespace spp {

namespace {

Matrix sample_gradients(const FiniteSumObjective& problem, const Matrix& X) {
  Matrix g(X.rows(), X.cols());
  for (Index s = 0; s < X.rows(); ++s) problem.sample_gradient(s, X.row(s).data(), g.row(s).data());
  return g;
}

const SampleMask& current_mask(const AugmentedState& state, std::optional<SampleMask>& scratch,
                               Index n, Index m) {
  if (state.mask) return *state.mask;
  scratch = SampleMask::full(n, m);
  return *scratch;
}

}  // namespace

AugmentedState init_state(const FiniteSumObjective& problem, const Vector& x0) {
  if (x0.size() != problem.dim()) throw std::invalid_argument("x0 has the wrong dimension");
  AugmentedState s;
  s.X = x0.transpose().replicate(problem.total_samples(), 1);
  s.grad = sample_gradients(problem, s.X);
  s.Y = s.grad;
  s.refresh_grad = s.grad;
  return s;
}

void advance(AugmentedState& state, const IterationDraw& draw, double alpha,
             const FiniteSumObjective& problem) {
  if (draw.k != state.k) throw std::logic_error("draw index does not match state iteration");
  if (draw.mask.total() != state.X.rows()) throw std::invalid_argument("draw shape mismatch");
  if (state.mask && state.mask->indicator() != draw.mask.indicator())
    throw std::logic_error("draw mask disagrees with the mask drawn for this iteration");

  if (draw.local == LocalChoice::averaging && draw.mask.is_full()) {
    state.refresh_grad = state.grad;
    state.last_refresh = state.k;
  }

  const SparseMatrix gamma = build_gamma(draw);
  const SparseMatrix r = build_row_mixing(draw, gamma);
  Matrix x_next = r * state.X - alpha * (gamma * state.Y);

  Matrix grad_next = state.grad;
  const SampleMask& nxt = draw.next_mask;
  for (Index i = 0; i < nxt.devices(); ++i)
    for (Index t = 0; t < nxt.batch(); ++t) {
      const Index s = nxt.row(i, t);
      if (!x_next.row(s).allFinite()) throw DivergenceError(state.k + 1, "non-finite iterate");
      problem.sample_gradient(s, x_next.row(s).data(), grad_next.row(s).data());
    }

  Matrix y_next = build_correction(draw).apply(state.Y);
  y_next += grad_next - state.grad;
  if (!y_next.allFinite()) throw DivergenceError(state.k + 1, "non-finite tracker");

  state.X = std::move(x_next);
  state.Y = std::move(y_next);
  state.grad = std::move(grad_next);
  state.mask = nxt;
  ++state.k;
}

AugmentedState step(const AugmentedState& state, const IterationDraw& draw, double alpha,
                    const FiniteSumObjective& problem) {
  AugmentedState next = state;
  advance(next, draw, alpha, problem);
  return next;
}

Matrix projected_x(const AugmentedState& state) {
  std::optional<SampleMask> scratch;
  const Index n = state.mask ? state.mask->devices() : 1;
  const SampleMask& mask = current_mask(state, scratch, n, state.X.rows() / n);
  return build_projection(mask) * state.X;
}

Matrix projected_y(const AugmentedState& state) {
  std::optional<SampleMask> scratch;
  const Index n = state.mask ? state.mask->devices() : 1;
  const SampleMask& mask = current_mask(state, scratch, n, state.Y.rows() / n);
  return build_projection(mask) * state.Y;
}

double tracking_violation(const AugmentedState& state) {
  const Eigen::RowVectorXd diff = state.Y.colwise().mean() - state.grad.colwise().mean();
  return diff.cwiseAbs().maxCoeff() / (1.0 + state.grad.cwiseAbs().maxCoeff());
}

void run_reference(const AlgorithmSetup& setup, const MeasureContext& ctx, const RunOptions& options,
                   Trajectory& out) {
  if (options.iterations < 1) throw std::invalid_argument("iteration count K must be >= 1");
  if (options.eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  validate_setup(setup);
  const auto& problem = *setup.problem;
  const DrawGenerator draws = make_draws(setup, options.seed);
  AugmentedState state = init_state(problem, options.x0);
  state.mask = draws.mask_at(0);

  out.records.clear();
  out.alpha = setup.alpha;
  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t k = 0;; ++k) {
    if (k % options.eval_every == 0 || k == options.iterations) {
      TrajectoryRecord rec{k, measure(state, ctx),
                           std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
      out.records.push_back(rec);
      if (options.on_eval) {
        const Vector xbar = projected_x(state).colwise().mean().transpose();
        options.on_eval(k, xbar);
      }
    }
    if (k == options.iterations) break;
    advance(state, draws.draw(k, *state.mask), setup.alpha, problem);
  }
}

Trajectory run_reference(const AlgorithmSetup& setup, const MeasureContext& ctx,
                         const RunOptions& options) {
  Trajectory t;
  run_reference(setup, ctx, options, t);
  return t;
}

}  // namespace spp
