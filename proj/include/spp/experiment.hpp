#pragma once

#include "spp/algorithms.hpp"
#include "spp/common.hpp"
#include "spp/datasplit.hpp"
#include "spp/topology.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace spp {

struct QuadraticConfig {
  Index m = 6;
  Index d = 3;
  double mu_reg = 0.0;
  double spread = 1.0;         // within-device anchor scale (drives sigma*)
  double heterogeneity = 1.0;  // device-offset scale (drives zeta*)
  std::uint64_t seed = 0;
  std::optional<Matrix> anchors;  // explicit n*m x d anchors override the generator
};

struct LogisticConfig {
  std::filesystem::path train;
  std::optional<std::filesystem::path> test;
  double lambda = 1e-3;
  int classes = 10;
  double optimum_tol = 1e-10;
  int optimum_max_iter = 200000;
};

struct SplitConfig {
  enum class Kind { uniform, arithmetic, hmax } kind = Kind::uniform;
  std::int64_t h = 0;
  std::optional<std::int64_t> m0;
  std::optional<std::int64_t> total;  // M; defaults to the largest feasible prefix of the dataset
  std::uint64_t seed = 0;
};

struct TopologyConfig {
  GraphKind kind = GraphKind::ring_directed;
  Index n = 1;
  double r = 0.0;
  ScheduleMode mode = ScheduleMode::random;
  std::int64_t period = 0;
  double radius = 0.5;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::string problem_kind;  // "quadratic" | "logistic"
  QuadraticConfig quadratic;
  LogisticConfig logistic;
  SplitConfig split;
  TopologyConfig topology;
  std::vector<Preset> algorithms;
  std::optional<double> alpha;  // empty means auto
  bool convex = false;          // auto step size uses the mu = 0 caps
  Index b = 1;
  double p = 0.1;
  std::int64_t K = 100;
  std::vector<std::uint64_t> seeds{0};
  std::int64_t eval_every = 1;
  std::filesystem::path output_dir = "out";
  nlohmann::json raw;  // the input document, echoed into the manifest
};

/// Field-level validation; throws std::invalid_argument("config.<field>: ...").
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunFlags {
  bool resume = false;
  unsigned threads = 0;  // 0: SPP_THREADS or hardware concurrency
};

/// Runs every (preset, seed); returns 0 when all runs completed without divergence.
int run_experiment(const ExperimentConfig& config, const RunFlags& flags = {});
int run_experiment(const std::filesystem::path& config_path, const RunFlags& flags = {});

/// Fraction of rows whose highest class score matches the label; ties go to the lowest class.
double eval_accuracy(const Vector& model, const Matrix& features, std::span<const int> labels,
                     int classes = 10);

/// 64-bit FNV-1a over raw bytes, used to fingerprint problem data.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace spp
