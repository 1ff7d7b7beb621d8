#pragma once

#include "spp/algorithms.hpp"
#include "spp/metrics.hpp"
#include "spp/objectives.hpp"

#include <string>
#include <vector>

namespace spp {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Seed-averaged metrics on the evaluation grid of a lockstep multi-seed run.
struct AveragedRun {
  std::vector<std::int64_t> k;
  std::vector<IterationMetrics> mean;
  std::int64_t hit = -1;  // first evaluated k with mean T <= stop_factor * T_0, or -1
};

/// Runs every seed in lockstep and averages metrics at each evaluation point.
/// Stops early once the averaged Lyapunov value falls to stop_factor * T_0 (if > 0).
AveragedRun average_over_seeds(const Stepper& stepper, const MeasureContext& ctx,
                               const std::vector<std::uint64_t>& seeds, std::int64_t K,
                               std::int64_t eval_every, const Vector& x0, double stop_factor = 0.0);

/// n = 4, m = 2, d = 1 with device anchors (0,2), (4,6), (0,2), (4,6): x* = 3, sigma* = 1, zeta* = 4.
std::shared_ptr<const QuadraticObjective> heterogeneous_quadratic();

/// The setup used by the equivalence and tracking suites for a preset.
AlgorithmSetup equivalence_setup(Preset preset);

CriterionResult check_equivalence();
CriterionResult check_matrix_laws();
CriterionResult check_projection_spectrum();
CriterionResult check_tracking_invariant();
CriterionResult check_gt_linear_rate();
CriterionResult check_heterogeneity_contrast();
CriterionResult check_vr_scaling();
CriterionResult check_convex_rate();
CriterionResult check_data_split();
CriterionResult check_objective_properties();

std::vector<CriterionResult> run_acceptance_suite();

}  // namespace spp
