#pragma once

#include "spp/common.hpp"
#include "spp/metrics.hpp"
#include "spp/objectives.hpp"
#include "spp/sampling.hpp"
#include "spp/topology.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string_view>

namespace spp {

enum class Preset {
  saga,
  l_svrg,
  sarah,
  local_sgd,
  dsgd,
  gossip_pga,
  local_saga,
  local_svrg,
  d_saga,
  pga_saga,
  gt_saga,
  pga_gt_saga,
};

std::string_view preset_name(Preset preset);
Preset parse_preset(std::string_view name);
std::span<const Preset> all_presets();

// Symbolic registry: which (W_k, V_k, G_k) each method draws from and its (rho, r, p, q).
enum class MixingChoice { scalar_one, fixed, identity_or_average, mixing_or_average };
enum class LocalChoiceSet { identity, averaging, identity_or_averaging };
enum class TrackingChoiceSet { scalar_one, identity, mixing };
enum class Symbol { zero, one, rho_w, r, p, b_over_m, p_or_b_over_m };

struct PresetRow {
  Preset preset;
  MixingChoice w;
  LocalChoiceSet v;
  TrackingChoiceSet g;
  Symbol rho, r, p, q;
};

std::span<const PresetRow> preset_table();
const PresetRow& preset_row(Preset preset);

Regime regime_of(Preset preset);
DelayedSource delayed_source_of(Preset preset);
bool centralized(Preset preset);

enum class StepsizeRegime { non_vr, vr_only, gt_vr, non_vr_convex, vr_only_convex, gt_vr_convex };

StepsizeRegime parse_stepsize_regime(std::string_view name);
StepsizeRegime stepsize_regime(Regime regime, bool convex);
/// Explicit step-size caps; terms dividing by sqrt(0) count as +infinity.
double max_stepsize(StepsizeRegime regime, double L, double rho_rw);

struct StepperOptions {
  Index batch = 1;  // b
  double p = 0.0;   // refresh / batch-switch probability (L-SVRG, Local-SVRG, SARAH)
  /// Keep grad F(X_k) explicitly. Defaults to on only where the estimator needs it.
  std::optional<bool> track_gradient_table;
};

struct AlgorithmSetup {
  Preset preset;
  MixingSchedule schedule;
  std::shared_ptr<const FiniteSumObjective> problem;
  double alpha = 0.0;
  StepperOptions options;
};

/// Builds the schedule a preset expects from a base graph (identity base for Local-*, r = 0 for fixed W).
MixingSchedule schedule_for(Preset preset, const MixingMatrix& base, double r,
                            ScheduleMode mode = ScheduleMode::random, std::int64_t period = 0);
BatchRule batch_rule(Preset preset, Index b, double p);
TrackingChoice tracking_of(Preset preset);
/// Throws std::invalid_argument on an inconsistent preset/topology/batch pairing.
void validate_setup(const AlgorithmSetup& setup);
DrawGenerator make_draws(const AlgorithmSetup& setup, std::uint64_t seed);

struct ResolvedParams {
  double rho_w = 0.0, r = 0.0, p = 0.0, q = 0.0;
  double rho_rw = 0.0;
};

/// (rho, r, p, q) realized by the draws this library generates for the setup.
ResolvedParams resolve_parameters(const AlgorithmSetup& setup);

/// Reduced per-device state. M x d members are empty unless the preset keeps them.
struct DeviceState {
  Matrix xhat;               // n x d
  Matrix yhat;               // n x d
  Matrix grad_table;         // M x d, grad F(X_k)
  Matrix device_grad_avg;    // n x d, per-device mean of grad_table
  Matrix tracker;            // n x d, device means of Y_k (gradient tracking)
  Matrix snapshot;           // n x d, x-hat at the last full refresh
  Matrix snapshot_grad_avg;  // n x d, device mean gradient at the snapshot
  bool estimator_ready = false;
  std::int64_t last_refresh = 0;
  std::int64_t k = 0;
  std::optional<SampleMask> mask;  // Lambda_k
};

class Stepper {
 public:
  explicit Stepper(AlgorithmSetup setup);

  const AlgorithmSetup& setup() const { return setup_; }
  Preset preset() const { return setup_.preset; }
  double alpha() const { return setup_.alpha; }
  const FiniteSumObjective& problem() const { return *setup_.problem; }
  bool tracks_table() const { return track_table_; }

  DrawGenerator draws(std::uint64_t seed) const { return make_draws(setup_, seed); }
  DeviceState init(const Vector& x0, const SampleMask& mask0) const;
  void advance(DeviceState& state, const IterationDraw& draw) const;
  DeviceState step(const DeviceState& state, const IterationDraw& draw) const;

 private:
  enum class Estimator { fresh, table, tracking, snapshot };

  void refresh_device_avg(DeviceState& state) const;

  AlgorithmSetup setup_;
  Estimator estimator_;
  bool track_table_;
  bool keeps_snapshot_;
};

Stepper make_stepper(AlgorithmSetup setup);

struct RunOptions {
  std::int64_t iterations = 1;  // K
  std::int64_t eval_every = 1;
  std::uint64_t seed = 0;
  Vector x0;
  /// Called at every evaluation point with the averaged iterate.
  std::function<void(std::int64_t, const Vector&)> on_eval;
};

/// Fills `out` as it goes so partial trajectories survive a DivergenceError.
void run_reduced(const Stepper& stepper, const MeasureContext& ctx, const RunOptions& options,
                 Trajectory& out);
Trajectory run_reduced(const Stepper& stepper, const MeasureContext& ctx, const RunOptions& options);

}  // namespace spp
