#pragma once

#include "spp/algorithms.hpp"
#include "spp/common.hpp"
#include "spp/metrics.hpp"
#include "spp/objectives.hpp"
#include "spp/sampling.hpp"

#include <optional>

namespace spp {

/// Per-sample state of the augmented graph (M = n*m rows).
struct AugmentedState {
  Matrix X;
  Matrix Y;
  Matrix grad;          // grad F(X_k), refreshed only where X changed
  std::int64_t k = 0;
  std::optional<SampleMask> mask;  // Lambda_k once known
  Matrix refresh_grad;  // grad F(X_{t_k}) at the last full-batch averaging step
  std::int64_t last_refresh = 0;
};

AugmentedState init_state(const FiniteSumObjective& problem, const Vector& x0);

/// X <- R X - alpha Gamma Y, then Y <- C Y + grad F(X_new) - grad F(X).
void advance(AugmentedState& state, const IterationDraw& draw, double alpha,
             const FiniteSumObjective& problem);
AugmentedState step(const AugmentedState& state, const IterationDraw& draw, double alpha,
                    const FiniteSumObjective& problem);

/// S_k X_k and S_k Y_k (full mask when Lambda_k is not yet known).
Matrix projected_x(const AugmentedState& state);
Matrix projected_y(const AugmentedState& state);

/// ||mean(Y) - mean(grad F(X))||_inf / (1 + ||grad F(X)||_inf).
double tracking_violation(const AugmentedState& state);

/// Runs the literal recursion with the draws of `setup`.
void run_reference(const AlgorithmSetup& setup, const MeasureContext& ctx, const RunOptions& options,
                   Trajectory& out);
Trajectory run_reference(const AlgorithmSetup& setup, const MeasureContext& ctx,
                         const RunOptions& options);

}  // namespace spp
