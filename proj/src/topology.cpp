#include "spp/topology.hpp"

#include "spp/rng.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>

namespace spp {

namespace {

constexpr double kStochasticTol = 1e-12;

Eigen::MatrixXd metropolis(const std::vector<std::vector<Index>>& adj) {
  const auto n = static_cast<Index>(adj.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j : adj[i]) {
      const auto di = adj[i].size();
      const auto dj = adj[j].size();
      w(i, j) = 1.0 / (1.0 + static_cast<double>(std::max(di, dj)));
    }
  }
  for (Index i = 0; i < n; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return w;
}

bool connected(const std::vector<std::vector<Index>>& adj) {
  const auto n = adj.size();
  std::vector<bool> seen(n, false);
  std::queue<Index> q;
  q.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!q.empty()) {
    const Index u = q.front();
    q.pop();
    for (Index v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
    }
  }
  return count == n;
}

void add_edge(std::vector<std::vector<Index>>& adj, Index a, Index b) {
  if (a == b) return;
  for (Index x : adj[a])
    if (x == b) return;
  adj[a].push_back(b);
  adj[b].push_back(a);
}

}  // namespace

GraphKind parse_graph_kind(std::string_view name) {
  if (name == "complete") return GraphKind::complete;
  if (name == "identity") return GraphKind::identity;
  if (name == "ring_directed" || name == "ring") return GraphKind::ring_directed;
  if (name == "exponential") return GraphKind::exponential;
  if (name == "geometric") return GraphKind::geometric;
  throw std::invalid_argument("unknown topology kind '" + std::string(name) + "'");
}

std::string_view to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::complete: return "complete";
    case GraphKind::identity: return "identity";
    case GraphKind::ring_directed: return "ring_directed";
    case GraphKind::exponential: return "exponential";
    case GraphKind::geometric: return "geometric";
  }
  return "?";
}

MixingMatrix::MixingMatrix(Eigen::MatrixXd weights) : w_(std::move(weights)) {
  if (w_.rows() < 1 || w_.rows() != w_.cols())
    throw std::invalid_argument("mixing matrix must be square and nonempty");
  if (!w_.allFinite() || (w_.array() < 0.0).any())
    throw std::invalid_argument("mixing matrix has negative or non-finite entries");
  const double row_err = (w_.rowwise().sum().array() - 1.0).abs().maxCoeff();
  const double col_err = (w_.colwise().sum().array() - 1.0).abs().maxCoeff();
  if (row_err > kStochasticTol || col_err > kStochasticTol)
    throw std::logic_error("mixing matrix is not doubly stochastic");
}

MixingMatrix MixingMatrix::identity(Index n) {
  return MixingMatrix(Eigen::MatrixXd::Identity(n, n));
}

MixingMatrix MixingMatrix::averaging(Index n) {
  return MixingMatrix(Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n)));
}

bool MixingMatrix::is_identity() const {
  return w_.isIdentity(0.0);
}

bool MixingMatrix::is_averaging() const {
  const double v = 1.0 / static_cast<double>(size());
  return (w_.array() == v).all();
}

MixingMatrix build_mixing(GraphKind kind, Index n, const GraphParams& params) {
  if (n < 1) throw std::invalid_argument("device count must be positive");
  switch (kind) {
    case GraphKind::complete: return MixingMatrix::averaging(n);
    case GraphKind::identity: return MixingMatrix::identity(n);
    case GraphKind::ring_directed: {
      if (n == 1) return MixingMatrix::identity(1);
      Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
      for (Index i = 0; i < n; ++i) {
        w(i, i) += 0.5;
        w(i, (i + 1) % n) += 0.5;
      }
      return MixingMatrix(std::move(w));
    }
    case GraphKind::exponential: {
      std::vector<std::vector<Index>> adj(n);
      for (Index i = 0; i < n; ++i)
        for (Index hop = 1; hop < n; hop *= 2) {
          add_edge(adj, i, (i + hop) % n);
          add_edge(adj, i, ((i - hop) % n + n) % n);
        }
      return MixingMatrix(metropolis(adj));
    }
    case GraphKind::geometric: {
      if (!(params.radius > 0.0 && params.radius <= 1.0))
        throw std::invalid_argument("geometric radius must lie in (0, 1]");
      for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
        Stream rng = make_stream(params.seed, static_cast<std::uint64_t>(attempt), Purpose::geometry);
        std::vector<std::pair<double, double>> pts(n);
        for (auto& [x, y] : pts) {
          x = uniform01(rng);
          y = uniform01(rng);
        }
        std::vector<std::vector<Index>> adj(n);
        for (Index i = 0; i < n; ++i)
          for (Index j = i + 1; j < n; ++j) {
            const double dx = pts[i].first - pts[j].first;
            const double dy = pts[i].second - pts[j].second;
            if (dx * dx + dy * dy <= params.radius * params.radius) add_edge(adj, i, j);
          }
        if (connected(adj)) return MixingMatrix(metropolis(adj));
      }
      throw std::runtime_error("geometric graph still disconnected after " +
                               std::to_string(params.max_attempts) + " attempts");
    }
  }
  throw std::invalid_argument("unknown topology kind");
}

double spectral_norm(const MixingMatrix& w) {
  const Index n = w.size();
  const Eigen::MatrixXd d =
      w.weights() - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
  return svd.singularValues()(0);
}

double spectral_gap(const MixingMatrix& w) {
  const double s = spectral_norm(w);
  return s * s;
}

double expected_contraction(double rho_w, double r, bool require_contraction) {
  if (rho_w < 0.0) throw std::invalid_argument("rho_W must be nonnegative");
  if (r < 0.0 || r > 1.0) throw std::invalid_argument("r must lie in [0, 1]");
  const double rho = (1.0 - r) * rho_w;
  if (require_contraction && rho >= 1.0)
    throw std::domain_error("expected contraction rho_{r,W} = " + std::to_string(rho) + " >= 1");
  return rho;
}

MixingSchedule::MixingSchedule(const MixingMatrix& base, double r, ScheduleMode mode,
                               std::int64_t period)
    : base_(std::make_shared<const MixingMatrix>(base)),
      average_(std::make_shared<const MixingMatrix>(MixingMatrix::averaging(base.size()))),
      r_(r),
      mode_(mode),
      period_(period) {
  if (r < 0.0 || r > 1.0) throw std::invalid_argument("global averaging probability r must lie in [0, 1]");
  if (mode_ == ScheduleMode::periodic) {
    if (period_ <= 0) period_ = r_ > 0.0 ? static_cast<std::int64_t>(std::ceil(1.0 / r_ - 1e-12)) : 0;
    if (r_ > 0.0 && period_ < 1) throw std::invalid_argument("period must be >= 1");
  }
}

bool MixingSchedule::draws_average(std::int64_t k, std::uint64_t seed) const {
  if (r_ <= 0.0) return false;
  if (mode_ == ScheduleMode::periodic) return period_ > 0 && k % period_ == 0;
  if (r_ >= 1.0) return true;
  Stream rng = make_stream(seed, static_cast<std::uint64_t>(k), Purpose::topology);
  return uniform01(rng) < r_;
}

const std::shared_ptr<const MixingMatrix>& MixingSchedule::draw(std::int64_t k,
                                                                std::uint64_t seed) const {
  return draws_average(k, seed) ? average_ : base_;
}

double MixingSchedule::rho_w() const { return spectral_gap(*base_); }

double MixingSchedule::rho_rw() const { return expected_contraction(rho_w(), r_); }

void write_csv(const MixingMatrix& w, std::ostream& out) {
  char buf[32];
  for (Index i = 0; i < w.size(); ++i) {
    for (Index j = 0; j < w.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", w(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
}

MixingMatrix read_mixing_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<Index>(rows.size());
  Eigen::MatrixXd w(n, n);
  for (Index i = 0; i < n; ++i) {
    if (static_cast<Index>(rows[i].size()) != n) throw std::invalid_argument("mixing CSV is not square");
    for (Index j = 0; j < n; ++j) w(i, j) = rows[i][j];
  }
  return MixingMatrix(std::move(w));
}

}  // namespace spp
