#include "doctest.h"

#include "spp/dataset.hpp"
#include "spp/experiment.hpp"
#include "spp/objectives.hpp"
#include "spp/reference.hpp"
#include "spp/rng.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

using namespace spp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("spp_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

json quadratic_doc(const fs::path& out) {
  return {{"problem", {{"kind", "quadratic"}, {"m", 6}, {"d", 3}, {"mu_reg", 0.1}, {"seed", 3}}},
          {"topology", {{"kind", "ring_directed"}, {"n", 4}, {"r", 0.1}}},
          {"algorithm", {"DSGD", "GT-SAGA", "L-SVRG"}},
          {"alpha", 0.05},
          {"b", 2},
          {"p", 0.2},
          {"K", 200},
          {"eval_every", 20},
          {"seeds", {1, 2}},
          {"output_dir", out.string()}};
}

// 10 classes, well separated along the class axis of a 12-dim feature space.
Dataset toy_digits(Index rows, std::uint64_t seed) {
  Stream rng = make_stream(seed, 0, Purpose::data);
  Dataset d;
  d.features = Matrix::Zero(rows, 12);
  d.labels.resize(rows);
  for (Index r = 0; r < rows; ++r) {
    const int c = static_cast<int>(r % 10);
    d.labels[r] = c;
    for (Index t = 0; t < 12; ++t) d.features(r, t) = 0.1 * standard_normal(rng);
    d.features(r, c) += 1.0;
    d.features(r, 11) = 1.0;
  }
  return d;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string("\"") + SPP_BINARY + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  const json good = quadratic_doc("out");
  CHECK_NOTHROW(parse_config(good));
  auto rejects = [&](auto mutate, const std::string& field) {
    json doc = good;
    mutate(doc);
    try {
      parse_config(doc);
      FAIL("accepted a bad config for ", field);
    } catch (const std::invalid_argument& e) {
      CHECK_MESSAGE(std::string(e.what()).rfind("config." + field, 0) == 0, e.what());
    }
  };
  rejects([](json& d) { d["alpha"] = -1; }, "alpha");
  rejects([](json& d) { d["alpha"] = "fast"; }, "alpha");
  rejects([](json& d) { d["algorithm"] = "adam"; }, "algorithm");
  rejects([](json& d) { d["b"] = 7; }, "b");
  rejects([](json& d) { d["p"] = 0; }, "p");
  rejects([](json& d) { d["K"] = 0; }, "K");
  rejects([](json& d) { d["seeds"] = {-1}; }, "seeds");
  rejects([](json& d) { d["topology"]["kind"] = "torus"; }, "topology");
  rejects([](json& d) { d["problem"]["kind"] = "svm"; }, "problem.kind");
  rejects([](json& d) { d["total_batch"] = 6; }, "total_batch");
  rejects([](json& d) { d.erase("problem"); }, "problem");
}

TEST_CASE("total_batch splits across devices") {
  json doc = quadratic_doc("out");
  doc.erase("b");
  doc["problem"]["m"] = 30;
  doc["total_batch"] = 200;
  doc["topology"]["n"] = 8;
  const ExperimentConfig cfg = parse_config(doc);
  CHECK(cfg.b == 25);
  CHECK(cfg.topology.n == 8);
}

TEST_CASE("logistic run echoes the resolved configuration") {
  const fs::path dir = scratch("logistic");
  write_dataset_csv(toy_digits(1600, 1), dir / "train.csv");
  write_dataset_csv(toy_digits(200, 2), dir / "test.csv");
  const json doc = {{"problem", {{"kind", "logistic"}, {"train", "train.csv"}, {"test", "test.csv"}, {"lambda", 0.001}}},
                    {"split", {{"kind", "uniform"}}},
                    {"topology", {{"kind", "ring_directed"}, {"n", 8}, {"r", 0.05}}},
                    {"algorithm", {"GT-SAGA", "PGA-GT-SAGA"}},
                    {"alpha", 0.05},
                    {"total_batch", 200},
                    {"K", 300},
                    {"eval_every", 100},
                    {"seeds", {0}},
                    {"output_dir", "out"}};
  std::ofstream(dir / "config.json") << doc.dump(2);
  REQUIRE(run_experiment(dir / "config.json") == 0);
  const json manifest = read_json(dir / "out" / "manifest.json");
  const json& resolved = manifest["config"]["resolved"]["GT-SAGA"];
  CHECK(resolved["n"] == 8);
  CHECK(resolved["b"] == 25);
  CHECK(resolved["m"] == 200);
  CHECK(resolved["alpha"].get<double>() == 0.05);
  CHECK(resolved["r"].get<double>() == 0.0);  // fixed-mixing preset ignores r
  CHECK(manifest["config"]["resolved"]["PGA-GT-SAGA"]["r"].get<double>() == 0.05);
  CHECK(manifest["config"]["problem"]["lambda"].get<double>() == 0.001);
  const json summary = read_json(dir / "out" / "GT-SAGA" / "0" / "summary.json");
  CHECK(summary["final_accuracy"].get<double>() > 0.9);
  CHECK(fs::exists(dir / "out" / "GT-SAGA" / "0" / "accuracy.csv"));
}

TEST_CASE("runs are byte-identical across invocations") {
  const fs::path a = scratch("repro_a"), b = scratch("repro_b");
  REQUIRE(run_experiment(parse_config(quadratic_doc(a / "out"))) == 0);
  REQUIRE(run_experiment(parse_config(quadratic_doc(b / "out")), {.threads = 1}) == 0);
  for (const char* preset : {"DSGD", "GT-SAGA", "L-SVRG"})
    for (const char* seed : {"1", "2"}) {
      const fs::path rel = fs::path(preset) / seed / "trajectory.csv";
      const std::string x = slurp(a / "out" / rel);
      CHECK(!x.empty());
      CHECK_MESSAGE(x == slurp(b / "out" / rel), rel.string());
    }
  CHECK(slurp(a / "out" / "DSGD" / "1" / "trajectory.csv") != slurp(a / "out" / "DSGD" / "2" / "trajectory.csv"));
}

TEST_CASE("auto step size resolves to the regime cap") {
  const fs::path dir = scratch("auto");
  json doc = quadratic_doc(dir / "out");
  doc["alpha"] = "auto";
  doc["algorithm"] = "GT-SAGA";
  doc["seeds"] = {0};
  REQUIRE(run_experiment(parse_config(doc)) == 0);
  const json s = read_json(dir / "out" / "GT-SAGA" / "0" / "summary.json");
  const double L = s["L"].get<double>(), rho = s["rho_rW"].get<double>();
  CHECK(s["alpha"].get<double>() == doctest::Approx(max_stepsize(StepsizeRegime::gt_vr, L, rho)).epsilon(1e-14));
  // cross-check the cap against its closed form
  CHECK(s["alpha"].get<double>() == doctest::Approx((1 - rho) * (1 - rho) / (528 * L)).epsilon(1e-14));
}

TEST_CASE("resume skips finished runs and the manifest lists every file") {
  const fs::path dir = scratch("resume");
  const ExperimentConfig cfg = parse_config(quadratic_doc(dir / "out"));
  REQUIRE(run_experiment(cfg) == 0);
  const fs::path traj = dir / "out" / "GT-SAGA" / "1" / "trajectory.csv";
  std::ofstream(traj, std::ios::app) << "sentinel\n";
  fs::remove(dir / "out" / "DSGD" / "2" / "summary.json");
  REQUIRE(run_experiment(cfg, {.resume = true}) == 0);
  CHECK(slurp(traj).find("sentinel") != std::string::npos);  // untouched
  CHECK(fs::exists(dir / "out" / "DSGD" / "2" / "summary.json"));  // redone

  const json manifest = read_json(dir / "out" / "manifest.json");
  CHECK(manifest["runs"].size() == 6);
  std::set<std::string> listed;
  for (const auto& f : manifest["files"]) listed.insert(f.get<std::string>());
  std::size_t on_disk = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "out"))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") {
      ++on_disk;
      CHECK_MESSAGE(listed.count(fs::relative(e.path(), dir / "out").generic_string()), e.path().string());
    }
  CHECK(on_disk == listed.size());
}

TEST_CASE("divergent runs are reported, not hidden") {
  const fs::path dir = scratch("diverge");
  json doc = quadratic_doc(dir / "out");
  doc["alpha"] = 50.0;
  doc["algorithm"] = "DSGD";
  doc["seeds"] = {0};
  doc["K"] = 5000;
  CHECK(run_experiment(parse_config(doc)) == 1);
  const json s = read_json(dir / "out" / "DSGD" / "0" / "summary.json");
  CHECK(s["status"]["diverged"] == true);
  CHECK(s["status"]["iteration"].get<std::int64_t>() > 0);
}

TEST_CASE("test accuracy") {
  const Dataset d = toy_digits(500, 5);
  const Vector zero = Vector::Zero(12 * 10);
  CHECK(eval_accuracy(zero, d.features, d.labels) == doctest::Approx(0.1));  // ties go to class 0

  Vector oracle = Vector::Zero(12 * 10);
  for (int c = 0; c < 10; ++c) oracle[c * 12 + c] = 1.0;
  CHECK(eval_accuracy(oracle, d.features, d.labels) == 1.0);
  CHECK(eval_accuracy(Vector(7.5 * oracle), d.features, d.labels) == 1.0);

  auto f = make_logistic(std::make_shared<const Matrix>(d.features), d.labels, 1e-3, {[] {
                           std::vector<Index> all(500);
                           for (Index i = 0; i < 500; ++i) all[i] = i;
                           return all;
                         }()});
  const Vector x = reference_optimum(*f);
  CHECK(eval_accuracy(x, d.features, d.labels) == 1.0);
  CHECK_THROWS_AS(eval_accuracy(Vector::Zero(5), d.features, d.labels), std::invalid_argument);
}

TEST_CASE("command line") {
  const fs::path dir = scratch("binary");
  write_dataset_csv(toy_digits(400, 3), dir / "train.csv");
  CHECK(run_binary("split --n 4 --dataset " + (dir / "train.csv").string() + " --h 2 --out " + dir.string()) == 0);
  const std::string alloc = slurp(dir / "allocation.csv");
  CHECK(alloc.rfind("node,1,2,3,4,5,6,7,8,9,10\n", 0) == 0);
  std::istringstream part(slurp(dir / "partition.csv"));
  std::string line;
  std::getline(part, line);
  CHECK(line == "device,row");
  int rows = 0;
  while (std::getline(part, line)) rows += !line.empty();
  CHECK(rows == 400);

  std::ofstream(dir / "config.json") << quadratic_doc(dir / "out").dump();
  CHECK(run_binary("run " + (dir / "config.json").string()) == 0);
  CHECK(fs::exists(dir / "out" / "manifest.json"));
  CHECK(run_binary("run " + (dir / "missing.json").string()) != 0);
  CHECK(run_binary("bogus") != 0);
}
