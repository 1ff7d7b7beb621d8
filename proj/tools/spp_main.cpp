#include "spp/dataset.hpp"
#include "spp/datasplit.hpp"
#include "spp/experiment.hpp"
#include "spp/verification.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace {

int cmd_verify() {
  int failed = 0;
  for (const auto& r : spp::run_acceptance_suite()) {
    std::printf("[%s] %2d %s: %s (%.2fs)\n", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(),
                r.detail.c_str(), r.seconds);
    std::fflush(stdout);
    failed += !r.passed;
  }
  std::printf("%d/10 criteria passed\n", 10 - failed);
  return failed ? 1 : 0;
}

struct SplitArgs {
  std::int64_t h = 0;
  spp::Index n = 0;
  std::string dataset;
  bool hmax = false;
  std::optional<std::int64_t> m0;
  std::optional<std::int64_t> total;
  std::uint64_t seed = 0;
  std::string out = ".";
};

int cmd_split(const SplitArgs& a) {
  const spp::Dataset data = spp::load_dataset(a.dataset);
  const std::int64_t step = a.hmax ? 400 : 10 * static_cast<std::int64_t>(a.n);
  const std::int64_t M = a.total.value_or(data.size() / step * step);
  if (M > data.size()) throw std::invalid_argument("--M exceeds the dataset size");
  const spp::LabelAllocation alloc = a.hmax ? spp::allocation_hmax(a.n, M) : spp::allocation_counts(a.n, M, a.h, a.m0);
  spp::check_constraints(alloc);
  const spp::Partition part = spp::partition(data.labels, alloc, a.seed);

  fs::create_directories(a.out);
  {
    std::ofstream f(fs::path(a.out) / "allocation.csv");
    spp::write_allocation_csv(alloc, f);
  }
  std::ofstream f(fs::path(a.out) / "partition.csv");
  f << "device,row\n";
  for (std::size_t i = 0; i < part.size(); ++i)
    for (auto r : part[i]) f << i << ',' << r << '\n';
  std::printf("M=%lld n=%lld m0=%lld -> %s\n", static_cast<long long>(M), static_cast<long long>(a.n),
              static_cast<long long>(alloc.m0), a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sample-wise push-pull decentralized optimization simulator"};
  app.require_subcommand(1);

  std::string config;
  spp::RunFlags flags;
  auto* run = app.add_subcommand("run", "run every (algorithm, seed) in a JSON config");
  run->add_option("config", config, "config file")->required()->check(CLI::ExistingFile);
  run->add_flag("--resume", flags.resume, "skip runs whose summary.json already exists");
  run->add_option("--threads", flags.threads, "parallel runs (default: SPP_THREADS or core count)");

  auto* verify = app.add_subcommand("verify", "run the acceptance suite");

  SplitArgs sa;
  auto* split = app.add_subcommand("split", "label-skewed allocation and partition of a dataset");
  split->set_help_flag("--help", "print this help");  // -h would clash with --h
  split->add_option("--h", sa.h, "arithmetic difference");
  split->add_option("--n", sa.n, "devices")->required();
  split->add_option("--dataset", sa.dataset, "dataset (.csv or binary)")->required()->check(CLI::ExistingFile);
  split->add_flag("--hmax", sa.hmax, "banded allocation with three missing classes per device");
  split->add_option("--m0", sa.m0, "smallest cell (derived when omitted)");
  split->add_option("--M", sa.total, "samples used (default: largest feasible prefix)");
  split->add_option("--seed", sa.seed);
  split->add_option("--out", sa.out, "output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return spp::run_experiment(fs::path(config), flags);
    if (*verify) return cmd_verify();
    if (*split) return cmd_split(sa);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "spp: %s\n", e.what());
    return 2;
  }
  return 0;
}
