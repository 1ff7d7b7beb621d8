#include "spp/experiment.hpp"

#include "spp/dataset.hpp"
#include "spp/objectives.hpp"
#include "spp/rng.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace spp {

namespace fs = std::filesystem;
using nlohmann::json;

// --- config parsing ----------------------------------------------------------

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw std::invalid_argument("config." + field + ": " + what);
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double get_number(const json& obj, const char* key, const std::string& path, double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) field_error(path + key, "expected a number");
  return v->get<double>();
}

std::int64_t get_int(const json& obj, const char* key, const std::string& path, std::int64_t fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) field_error(path + key, "expected an integer");
  return v->get<std::int64_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& path, std::string fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_string()) field_error(path + key, "expected a string");
  return v->get<std::string>();
}

template <class F>
auto wrap(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const std::logic_error& e) {
    if (std::string(e.what()).rfind("config.", 0) == 0) throw;
    field_error(field, e.what());
  }
}

fs::path resolve_path(const std::string& p, const fs::path& base) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw std::invalid_argument("config: expected a JSON object");
  ExperimentConfig cfg;
  cfg.raw = doc;

  const json* problem = find(doc, "problem");
  if (!problem || !problem->is_object()) field_error("problem", "missing problem section");
  cfg.problem_kind = get_string(*problem, "kind", "problem.", "");
  if (cfg.problem_kind == "quadratic") {
    auto& q = cfg.quadratic;
    q.m = get_int(*problem, "m", "problem.", q.m);
    q.d = get_int(*problem, "d", "problem.", q.d);
    q.mu_reg = get_number(*problem, "mu_reg", "problem.", q.mu_reg);
    q.spread = get_number(*problem, "spread", "problem.", q.spread);
    q.heterogeneity = get_number(*problem, "heterogeneity", "problem.", q.heterogeneity);
    q.seed = static_cast<std::uint64_t>(get_int(*problem, "seed", "problem.", 0));
    if (q.m < 1) field_error("problem.m", "must be >= 1");
    if (q.d < 1) field_error("problem.d", "must be >= 1");
    if (q.mu_reg < 0) field_error("problem.mu_reg", "must be >= 0");
    if (const json* a = find(*problem, "anchors")) {
      if (!a->is_array() || a->empty() || !(*a)[0].is_array())
        field_error("problem.anchors", "expected a list of rows");
      Matrix anchors(static_cast<Index>(a->size()), static_cast<Index>((*a)[0].size()));
      for (Index r = 0; r < anchors.rows(); ++r) {
        const json& row = (*a)[r];
        if (!row.is_array() || static_cast<Index>(row.size()) != anchors.cols())
          field_error("problem.anchors", "rows must all have the same length");
        for (Index t = 0; t < anchors.cols(); ++t) anchors(r, t) = row[t].get<double>();
      }
      q.d = anchors.cols();
      q.anchors = std::move(anchors);
    }
  } else if (cfg.problem_kind == "logistic") {
    auto& l = cfg.logistic;
    const std::string train = get_string(*problem, "train", "problem.", "");
    if (train.empty()) field_error("problem.train", "dataset path required");
    l.train = resolve_path(train, base_dir);
    const std::string test = get_string(*problem, "test", "problem.", "");
    if (!test.empty()) l.test = resolve_path(test, base_dir);
    l.lambda = get_number(*problem, "lambda", "problem.", l.lambda);
    l.classes = static_cast<int>(get_int(*problem, "classes", "problem.", l.classes));
    l.optimum_tol = get_number(*problem, "optimum_tol", "problem.", l.optimum_tol);
    l.optimum_max_iter = static_cast<int>(get_int(*problem, "optimum_max_iter", "problem.", l.optimum_max_iter));
    if (!(l.lambda > 0)) field_error("problem.lambda", "must be > 0");
    if (l.classes != kClasses) field_error("problem.classes", "only 10-class data is supported");
  } else {
    field_error("problem.kind", "expected \"quadratic\" or \"logistic\"");
  }

  if (const json* split = find(doc, "split")) {
    const std::string kind = get_string(*split, "kind", "split.", "uniform");
    if (kind == "uniform")
      cfg.split.kind = SplitConfig::Kind::uniform;
    else if (kind == "h")
      cfg.split.kind = SplitConfig::Kind::arithmetic;
    else if (kind == "hmax")
      cfg.split.kind = SplitConfig::Kind::hmax;
    else
      field_error("split.kind", "expected \"uniform\", \"h\" or \"hmax\"");
    cfg.split.h = get_int(*split, "h", "split.", 0);
    if (find(*split, "m0")) cfg.split.m0 = get_int(*split, "m0", "split.", 0);
    if (find(*split, "M")) cfg.split.total = get_int(*split, "M", "split.", 0);
    cfg.split.seed = static_cast<std::uint64_t>(get_int(*split, "seed", "split.", 0));
    if (cfg.split.h < 0) field_error("split.h", "must be >= 0");
  }

  const json* topo = find(doc, "topology");
  if (!topo || !topo->is_object()) field_error("topology", "missing topology section");
  auto& t = cfg.topology;
  t.kind = wrap("topology.kind", [&] { return parse_graph_kind(get_string(*topo, "kind", "topology.", "ring_directed")); });
  t.n = get_int(*topo, "n", "topology.", 1);
  t.r = get_number(*topo, "r", "topology.", 0.0);
  const std::string mode = get_string(*topo, "mode", "topology.", "random");
  if (mode == "random")
    t.mode = ScheduleMode::random;
  else if (mode == "periodic")
    t.mode = ScheduleMode::periodic;
  else
    field_error("topology.mode", "expected \"random\" or \"periodic\"");
  t.period = get_int(*topo, "period", "topology.", 0);
  t.radius = get_number(*topo, "radius", "topology.", t.radius);
  t.seed = static_cast<std::uint64_t>(get_int(*topo, "seed", "topology.", 0));
  if (t.n < 1) field_error("topology.n", "must be >= 1");
  if (t.r < 0 || t.r > 1) field_error("topology.r", "must lie in [0, 1]");

  const json* algo = find(doc, "algorithm");
  if (!algo) field_error("algorithm", "preset name or list of names required");
  auto add = [&](const json& v) {
    if (!v.is_string()) field_error("algorithm", "expected preset names");
    cfg.algorithms.push_back(wrap("algorithm", [&] { return parse_preset(v.get<std::string>()); }));
  };
  if (algo->is_array())
    for (const auto& v : *algo) add(v);
  else
    add(*algo);
  if (cfg.algorithms.empty()) field_error("algorithm", "no presets given");

  if (const json* a = find(doc, "alpha")) {
    if (a->is_string()) {
      if (a->get<std::string>() != "auto") field_error("alpha", "expected a number or \"auto\"");
    } else if (a->is_number()) {
      cfg.alpha = a->get<double>();
      if (!(*cfg.alpha > 0)) field_error("alpha", "must be > 0");
    } else {
      field_error("alpha", "expected a number or \"auto\"");
    }
  }
  if (const json* c = find(doc, "convex")) {
    if (!c->is_boolean()) field_error("convex", "expected true or false");
    cfg.convex = c->get<bool>();
  }

  if (find(doc, "total_batch")) {
    const std::int64_t total = get_int(doc, "total_batch", "", 0);
    if (total < 1 || total % t.n != 0) field_error("total_batch", "must be a positive multiple of topology.n");
    cfg.b = total / t.n;
    if (find(doc, "b") && get_int(doc, "b", "", 0) != cfg.b) field_error("b", "disagrees with total_batch / n");
  } else {
    cfg.b = get_int(doc, "b", "", 1);
  }
  if (cfg.b < 1) field_error("b", "must be >= 1");
  cfg.p = get_number(doc, "p", "", cfg.p);
  if (!(cfg.p > 0 && cfg.p <= 1)) field_error("p", "must lie in (0, 1]");
  cfg.K = get_int(doc, "K", "", cfg.K);
  if (cfg.K < 1) field_error("K", "must be >= 1");
  cfg.eval_every = get_int(doc, "eval_every", "", cfg.eval_every);
  if (cfg.eval_every < 1) field_error("eval_every", "must be >= 1");
  if (const json* s = find(doc, "seeds")) {
    if (!s->is_array() || s->empty()) field_error("seeds", "expected a nonempty list of integers");
    cfg.seeds.clear();
    for (const auto& v : *s) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) field_error("seeds", "expected nonnegative integers");
      cfg.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  cfg.output_dir = resolve_path(get_string(doc, "output_dir", "", "out"), base_dir);

  if (cfg.problem_kind == "quadratic" && cfg.quadratic.anchors &&
      cfg.quadratic.anchors->rows() != t.n * cfg.quadratic.m)
    field_error("problem.anchors", "needs topology.n * problem.m rows");
  if (cfg.problem_kind == "quadratic" && cfg.b > cfg.quadratic.m) field_error("b", "exceeds samples per device m");
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return parse_config(doc, path.parent_path());
}

// --- problem construction ----------------------------------------------------

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

double eval_accuracy(const Vector& model, const Matrix& features, std::span<const int> labels, int classes) {
  const Index p = features.cols();
  if (model.size() != p * classes || static_cast<Index>(labels.size()) != features.rows())
    throw std::invalid_argument("eval_accuracy: model/test-set shape mismatch");
  if (features.rows() == 0) return 0.0;
  std::size_t correct = 0;
  for (Index r = 0; r < features.rows(); ++r) {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < classes; ++c) {
      const double score = features.row(r).dot(model.segment(c * p, p));
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    correct += best == labels[r];
  }
  return static_cast<double>(correct) / static_cast<double>(features.rows());
}

namespace {

struct BuiltProblem {
  std::shared_ptr<const FiniteSumObjective> problem;
  ProblemConstants constants;
};

struct ProblemPair {
  BuiltProblem distributed;
  std::optional<BuiltProblem> pooled;  // all data on one device, for centralized presets
  std::uint64_t fingerprint = 0;
  std::shared_ptr<const Dataset> test;
};

BuiltProblem finish(std::shared_ptr<const FiniteSumObjective> f, const OptimumOptions& opt) {
  BuiltProblem b;
  b.constants = problem_constants(*f, opt);
  b.problem = std::move(f);
  return b;
}

Matrix quadratic_anchors(const QuadraticConfig& q, Index n) {
  if (q.anchors) return *q.anchors;
  Stream rng = make_stream(q.seed, 0, Purpose::data);
  Matrix offsets(n, q.d);
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < q.d; ++t) offsets(i, t) = q.heterogeneity * standard_normal(rng);
  Matrix a(n * q.m, q.d);
  for (Index s = 0; s < n * q.m; ++s)
    for (Index t = 0; t < q.d; ++t) a(s, t) = offsets(s / q.m, t) + q.spread * standard_normal(rng);
  return a;
}

LabelAllocation allocation_for(const SplitConfig& split, Index n, const Dataset& data) {
  std::int64_t step = 10 * n;
  if (split.kind == SplitConfig::Kind::hmax) step = 400;
  std::int64_t M = split.total.value_or(data.size() / step * step);
  if (M > data.size()) field_error("split.M", "exceeds the dataset size");
  return wrap("split", [&] {
    switch (split.kind) {
      case SplitConfig::Kind::uniform: return allocation_counts(n, M, 0);
      case SplitConfig::Kind::arithmetic: return allocation_counts(n, M, split.h, split.m0);
      case SplitConfig::Kind::hmax: return allocation_hmax(n, M);
    }
    throw std::logic_error("unknown split");
  });
}

ProblemPair build_problems(const ExperimentConfig& cfg, bool need_pooled) {
  ProblemPair out;
  const Index n = cfg.topology.n;
  if (cfg.problem_kind == "quadratic") {
    const auto& q = cfg.quadratic;
    Matrix anchors = quadratic_anchors(q, n);
    out.fingerprint = fnv1a(anchors.data(), sizeof(double) * anchors.size());
    out.fingerprint = fnv1a(&q.mu_reg, sizeof q.mu_reg, out.fingerprint);
    out.distributed = finish(make_quadratic(anchors, n, q.m, q.mu_reg), {});
    if (need_pooled) out.pooled = finish(make_quadratic(anchors, 1, n * q.m, q.mu_reg), {});
    return out;
  }

  const auto& l = cfg.logistic;
  auto train = std::make_shared<Dataset>(load_dataset(l.train));
  if (l.test) out.test = std::make_shared<const Dataset>(load_dataset(*l.test));
  const LabelAllocation alloc = allocation_for(cfg.split, n, *train);
  Partition part = wrap("split", [&] { return partition(train->labels, alloc, cfg.split.seed); });
  const Index m = static_cast<Index>(part.front().size());
  if (cfg.b > m) field_error("b", "exceeds samples per device m = " + std::to_string(m));

  auto features = std::make_shared<const Matrix>(std::move(train->features));
  const OptimumOptions opt{l.optimum_tol, l.optimum_max_iter};
  out.fingerprint = fnv1a(features->data(), sizeof(double) * features->size());
  out.fingerprint = fnv1a(train->labels.data(), sizeof(int) * train->labels.size(), out.fingerprint);
  for (const auto& dev : part) out.fingerprint = fnv1a(dev.data(), sizeof(Index) * dev.size(), out.fingerprint);
  out.fingerprint = fnv1a(&l.lambda, sizeof l.lambda, out.fingerprint);

  if (need_pooled) {
    Partition merged(1);
    for (const auto& dev : part) merged[0].insert(merged[0].end(), dev.begin(), dev.end());
    out.pooled = finish(make_logistic(features, train->labels, l.lambda, std::move(merged), l.classes), opt);
  }
  out.distributed = finish(make_logistic(features, train->labels, l.lambda, std::move(part), l.classes), opt);
  return out;
}

// --- per-run output ----------------------------------------------------------

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json metrics_json(const IterationMetrics& m) {
  return {{"f_gap", m.f_gap},         {"opt_gap", m.opt_gap}, {"consensus_err", m.consensus_err},
          {"vr_err", m.vr_err},       {"delayed_vr_err", m.delayed_vr_err},
          {"gt_err", m.gt_err},       {"lyapunov", m.lyapunov}};
}

struct PresetPlan {
  Preset preset;
  AlgorithmSetup setup;
  ResolvedParams params;
  LyapunovCoeffs coeffs;
  std::shared_ptr<const MeasureContext> ctx;
  const BuiltProblem* problem;
  double rho_w_unsquared;
};

struct RunOutcome {
  Preset preset;
  std::uint64_t seed;
  bool diverged = false;
  std::int64_t diverged_at = -1;
  bool resumed = false;
  std::string error;
  std::vector<std::string> files;
};

PresetPlan plan_preset(const ExperimentConfig& cfg, Preset preset, const ProblemPair& problems,
                       const MixingMatrix& base) {
  const bool pooled = centralized(preset) && cfg.topology.n > 1;
  const BuiltProblem& bp = pooled ? *problems.pooled : problems.distributed;
  const Index n = bp.problem->devices();
  const std::string field = "algorithm[" + std::string(preset_name(preset)) + "]";

  const MixingMatrix graph = n == base.size() ? base : MixingMatrix::identity(n);
  MixingSchedule schedule = wrap("topology", [&] {
    return schedule_for(preset, graph, cfg.topology.r, cfg.topology.mode, cfg.topology.period);
  });
  StepperOptions opts;
  opts.batch = pooled ? cfg.b * cfg.topology.n : cfg.b;
  opts.p = cfg.p;
  // SVRG-type estimators keep the table only so the VR error term can be reported.
  if (delayed_source_of(preset) == DelayedSource::snapshot) opts.track_gradient_table = true;

  PresetPlan plan{preset, AlgorithmSetup{preset, schedule, bp.problem, 0.0, opts}, {}, {}, nullptr, &bp, 0.0};
  plan.params = wrap(field, [&] { return resolve_parameters(plan.setup); });
  plan.rho_w_unsquared = spectral_norm(schedule.base());
  const Regime regime = regime_of(preset);
  const double L = bp.constants.L;
  if (cfg.alpha) {
    plan.setup.alpha = *cfg.alpha;
  } else {
    plan.setup.alpha = wrap("alpha", [&] {
      return max_stepsize(stepsize_regime(regime, cfg.convex), L, plan.params.rho_rw);
    });
  }
  const auto& pr = plan.params;
  const Index M = bp.problem->total_samples();
  if (regime == Regime::gt_vr && pr.rho_rw == 0.0) {
    // Exact averaging every step keeps X-hat consensual, so the consensus weight is moot.
    const double a2 = plan.setup.alpha * plan.setup.alpha;
    plan.coeffs = LyapunovCoeffs{regime, 1.0, 0.0, 0.0, 20.0 * a2 / (static_cast<double>(M) * pr.q),
                                 8.0 * a2 / static_cast<double>(n)};
  } else {
    plan.coeffs = wrap(field, [&] {
      return lyapunov_coeffs(regime, plan.setup.alpha, L, n, M, pr.rho_rw, pr.r, pr.p, pr.q);
    });
  }
  plan.ctx = std::make_shared<const MeasureContext>(
      make_measure_context(bp.problem, bp.constants.x_star, plan.coeffs, delayed_source_of(preset)));
  return plan;
}

RunOutcome run_one(const ExperimentConfig& cfg, const PresetPlan& plan, std::uint64_t seed,
                   const ProblemPair& problems, bool resume) {
  RunOutcome out{.preset = plan.preset, .seed = seed};
  const std::string rel = std::string(preset_name(plan.preset)) + "/" + std::to_string(seed);
  const fs::path dir = cfg.output_dir / rel;
  const bool has_acc = problems.test && cfg.problem_kind == "logistic";
  out.files = {rel + "/trajectory.csv", rel + "/summary.json"};
  if (has_acc) out.files.push_back(rel + "/accuracy.csv");

  if (resume && fs::exists(dir / "summary.json") && fs::exists(dir / "trajectory.csv")) {
    std::ifstream in(dir / "summary.json");
    const json prev = json::parse(in, nullptr, false);
    if (!prev.is_discarded() && prev.contains("status")) {
      out.resumed = true;
      out.diverged = prev["status"].value("diverged", false);
      if (out.diverged) out.diverged_at = prev["status"].value("iteration", std::int64_t{-1});
      return out;
    }
  }
  fs::create_directories(dir);

  const Stepper stepper(plan.setup);
  RunOptions ro;
  ro.iterations = cfg.K;
  ro.eval_every = cfg.eval_every;
  ro.seed = seed;
  ro.x0 = Vector::Zero(plan.problem->problem->dim());
  std::vector<std::pair<std::int64_t, double>> accuracy;
  if (has_acc)
    ro.on_eval = [&](std::int64_t k, const Vector& xbar) {
      accuracy.emplace_back(k, eval_accuracy(xbar, problems.test->features, problems.test->labels));
    };

  Trajectory traj;
  const auto start = std::chrono::steady_clock::now();
  try {
    run_reduced(stepper, *plan.ctx, ro, traj);
  } catch (const DivergenceError& e) {
    out.diverged = true;
    out.diverged_at = e.iteration();
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  {
    std::ofstream f(dir / "trajectory.csv");
    write_trajectory_csv(traj, f);
  }
  if (has_acc) {
    std::ofstream f(dir / "accuracy.csv");
    f << "k,accuracy\n";
    for (auto [k, a] : accuracy) f << k << ',' << fmt17(a) << '\n';
  }

  json rate = nullptr;
  if (!out.diverged) {
    std::vector<std::pair<double, double>> series;
    for (const auto& r : traj.records) series.emplace_back(static_cast<double>(r.k), r.metrics.lyapunov);
    try {
      const RateFit fit = rate_fit(series, {series.size() / 10, 1e3});
      rate = {{"rate", fit.rate}, {"r_squared", fit.r_squared}, {"points", fit.points}};
    } catch (const std::exception&) {
    }
  }
  const auto& c = plan.problem->constants;
  const auto& pr = plan.params;
  json summary = {
      {"preset", preset_name(plan.preset)},
      {"seed", seed},
      {"status", {{"diverged", out.diverged}, {"iteration", out.diverged ? json(out.diverged_at) : json(nullptr)}}},
      {"alpha", plan.setup.alpha},
      {"K", cfg.K},
      {"n", plan.problem->problem->devices()},
      {"m", plan.problem->problem->samples_per_device()},
      {"b", plan.setup.options.batch},
      {"rho_W", pr.rho_w},
      {"rho_W_unsquared", plan.rho_w_unsquared},
      {"rho_rW", pr.rho_rw},
      {"r", pr.r},
      {"p", pr.p},
      {"q", pr.q},
      {"L", c.L},
      {"mu", c.mu},
      {"sigma_star", c.sigma_star},
      {"zeta_star", c.zeta_star},
      {"lyapunov_coeffs", {{"c0", plan.coeffs.c0}, {"c1", plan.coeffs.c1}, {"c2", plan.coeffs.c2},
                           {"c3", plan.coeffs.c3}, {"c4", plan.coeffs.c4}, {"regime", to_string(plan.coeffs.regime)}}},
      {"final", traj.records.empty() ? json(nullptr) : metrics_json(traj.records.back().metrics)},
      {"final_k", traj.records.empty() ? json(nullptr) : json(traj.records.back().k)},
      {"fitted_rate", rate},
      {"final_accuracy", accuracy.empty() ? json(nullptr) : json(accuracy.back().second)},
      {"wall_seconds", wall},
  };
  std::ofstream f(dir / "summary.json");
  f << summary.dump(2) << '\n';
  return out;
}

unsigned thread_budget(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SPP_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, const RunFlags& flags) {
  bool need_pooled = false;
  for (Preset p : cfg.algorithms) need_pooled |= centralized(p) && cfg.topology.n > 1;
  const ProblemPair problems = build_problems(cfg, need_pooled);

  GraphParams gp;
  gp.radius = cfg.topology.radius;
  gp.seed = cfg.topology.seed;
  const MixingMatrix base = wrap("topology", [&] { return build_mixing(cfg.topology.kind, cfg.topology.n, gp); });

  std::vector<PresetPlan> plans;
  for (Preset p : cfg.algorithms) plans.push_back(plan_preset(cfg, p, problems, base));

  struct Task {
    std::size_t plan;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < plans.size(); ++i)
    for (std::uint64_t s : cfg.seeds) tasks.push_back({i, s});
  std::vector<RunOutcome> outcomes(tasks.size());

  fs::create_directories(cfg.output_dir);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
      const auto& task = tasks[t];
      try {
        outcomes[t] = run_one(cfg, plans[task.plan], task.seed, problems, flags.resume);
      } catch (const std::exception& e) {
        outcomes[t] = RunOutcome{.preset = plans[task.plan].preset, .seed = task.seed};
        outcomes[t].error = e.what();
      }
    }
  };
  const unsigned threads = std::min<unsigned>(thread_budget(flags.threads), static_cast<unsigned>(tasks.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  json resolved = cfg.raw;
  json per_preset = json::object();
  for (const auto& plan : plans)
    per_preset[std::string(preset_name(plan.preset))] = {
        {"alpha", plan.setup.alpha},          {"b", plan.setup.options.batch},
        {"n", plan.problem->problem->devices()}, {"m", plan.problem->problem->samples_per_device()},
        {"rho_W", plan.params.rho_w},         {"rho_rW", plan.params.rho_rw},
        {"r", plan.params.r},                 {"p", plan.params.p},
        {"q", plan.params.q}};
  resolved["resolved"] = per_preset;

  std::set<std::string> files;
  json runs = json::array();
  int status = 0;
  for (const auto& o : outcomes) {
    json run = {{"preset", preset_name(o.preset)}, {"seed", o.seed}, {"diverged", o.diverged}};
    if (o.diverged) {
      run["iteration"] = o.diverged_at;
      status = 1;
    }
    if (!o.error.empty()) {
      run["error"] = o.error;
      status = 1;
      std::cerr << preset_name(o.preset) << " seed " << o.seed << ": " << o.error << '\n';
    } else {
      files.insert(o.files.begin(), o.files.end());
    }
    runs.push_back(run);
  }
  char fp[17];
  std::snprintf(fp, sizeof fp, "%016llx", static_cast<unsigned long long>(problems.fingerprint));
  json manifest = {{"config", resolved},
                   {"problem_fingerprint", fp},
                   {"problem_kind", cfg.problem_kind},
                   {"runs", runs},
                   {"files", std::vector<std::string>(files.begin(), files.end())}};
  std::ofstream f(cfg.output_dir / "manifest.json");
  f << manifest.dump(2) << '\n';
  return status;
}

int run_experiment(const fs::path& config_path, const RunFlags& flags) {
  return run_experiment(load_config(config_path), flags);
}

}  // namespace spp
