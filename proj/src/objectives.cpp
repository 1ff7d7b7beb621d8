#include "spp/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace spp {

namespace {

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

FiniteSumObjective::FiniteSumObjective(Index n, Index m, Index d) : n_(n), m_(m), d_(d) {
  if (n < 1 || m < 1 || d < 1) throw std::invalid_argument("objective needs n, m, d >= 1");
}

double FiniteSumObjective::device_value(Index i, const Vector& x) const {
  double acc = 0.0;
  for (Index j = 0; j < m_; ++j) acc += sample_value(i * m_ + j, x.data());
  return acc / static_cast<double>(m_);
}

double FiniteSumObjective::value(const Vector& x) const {
  if (x.size() != d_) throw std::invalid_argument("dimension mismatch");
  double acc = 0.0;
  for (Index s = 0; s < total_samples(); ++s) acc += sample_value(s, x.data());
  return acc / static_cast<double>(total_samples());
}

Vector FiniteSumObjective::sample_gradient(Index s, const Vector& x) const {
  Vector g(d_);
  sample_gradient(s, x.data(), g.data());
  return g;
}

Vector FiniteSumObjective::device_gradient(Index i, const Vector& x) const {
  Vector acc = Vector::Zero(d_);
  Vector g(d_);
  for (Index j = 0; j < m_; ++j) {
    sample_gradient(i * m_ + j, x.data(), g.data());
    acc += g;
  }
  return acc / static_cast<double>(m_);
}

Vector FiniteSumObjective::gradient(const Vector& x) const {
  if (x.size() != d_) throw std::invalid_argument("dimension mismatch");
  Vector acc = Vector::Zero(d_);
  Vector g(d_);
  for (Index s = 0; s < total_samples(); ++s) {
    sample_gradient(s, x.data(), g.data());
    acc += g;
  }
  return acc / static_cast<double>(total_samples());
}

// --- quadratic ---------------------------------------------------------------

QuadraticObjective::QuadraticObjective(Matrix anchors, Index n, Index m, double mu_reg,
                                       Vector curvature)
    : FiniteSumObjective(n, m, anchors.cols()),
      anchors_(std::move(anchors)),
      h_(std::move(curvature)),
      mu_reg_(mu_reg) {
  if (anchors_.rows() != n * m) throw std::invalid_argument("anchors must have n*m rows");
  if (mu_reg < 0.0) throw std::invalid_argument("mu_reg must be nonnegative");
  if (h_.size() != anchors_.cols() || (h_.array() < 0.0).any())
    throw std::invalid_argument("curvature must be a nonnegative d-vector");
}

double QuadraticObjective::sample_value(Index s, const double* x) const {
  const Eigen::Map<const Vector> xv(x, dim());
  const Vector diff = xv - anchors_.row(s).transpose();
  return 0.5 * diff.dot(h_.cwiseProduct(diff)) + 0.5 * mu_reg_ * xv.squaredNorm();
}

void QuadraticObjective::sample_gradient(Index s, const double* x, double* g) const {
  const double* a = anchors_.row(s).data();
  for (Index t = 0; t < dim(); ++t) g[t] = h_[t] * (x[t] - a[t]) + mu_reg_ * x[t];
}

Smoothness QuadraticObjective::smoothness() const {
  return {h_.maxCoeff() + mu_reg_, h_.minCoeff() + mu_reg_};
}

std::optional<Vector> QuadraticObjective::closed_form_optimum() const {
  const Vector mean = anchors_.colwise().mean().transpose();
  Vector x(dim());
  for (Index t = 0; t < dim(); ++t) {
    const double denom = h_[t] + mu_reg_;
    x[t] = denom > 0.0 ? h_[t] * mean[t] / denom : 0.0;
  }
  return x;
}

std::vector<std::pair<std::string, double>> QuadraticObjective::parameters() const {
  return {{"n", static_cast<double>(devices())},
          {"m", static_cast<double>(samples_per_device())},
          {"d", static_cast<double>(dim())},
          {"mu_reg", mu_reg_}};
}

std::shared_ptr<const QuadraticObjective> make_quadratic(Matrix anchors, Index n, Index m,
                                                         double mu_reg,
                                                         std::optional<Vector> curvature) {
  Vector h = curvature ? *curvature : Vector::Ones(anchors.cols());
  return std::make_shared<const QuadraticObjective>(std::move(anchors), n, m, mu_reg, std::move(h));
}

// --- logistic ----------------------------------------------------------------

namespace {

Index partition_width(const Partition& p) {
  if (p.empty() || p.front().empty()) throw std::invalid_argument("empty partition");
  for (const auto& dev : p)
    if (dev.size() != p.front().size())
      throw std::invalid_argument("partition must give every device the same number of samples");
  return static_cast<Index>(p.front().size());
}

}  // namespace

LogisticObjective::LogisticObjective(std::shared_ptr<const Matrix> features, std::vector<int> labels,
                                     double lambda, Partition partition, int classes)
    : FiniteSumObjective(static_cast<Index>(partition.size()), partition_width(partition),
                         features->cols() * classes),
      features_(std::move(features)),
      labels_(std::move(labels)),
      lambda_(lambda),
      classes_(classes) {
  if (lambda <= 0.0) throw std::invalid_argument("lambda must be positive");
  if (static_cast<Index>(labels_.size()) != features_->rows())
    throw std::invalid_argument("labels and features disagree on sample count");
  rows_.reserve(static_cast<std::size_t>(total_samples()));
  std::vector<bool> used(labels_.size(), false);
  for (const auto& dev : partition)
    for (Index r : dev) {
      if (r < 0 || r >= features_->rows() || used[r])
        throw std::invalid_argument("partition references an invalid or repeated sample");
      used[r] = true;
      rows_.push_back(r);
    }
  for (int y : labels_)
    if (y < 0 || y >= classes) throw std::invalid_argument("label out of range");
}

double LogisticObjective::sample_value(Index s, const double* x) const {
  const Index row = rows_[s];
  const Index p = feature_dim();
  const Eigen::Map<const Vector> xv(x, dim());
  const auto theta = features_->row(row);
  double loss = 0.0;
  for (int c = 0; c < classes_; ++c) {
    const double phi = labels_[row] == c ? 1.0 : -1.0;
    const double z = theta.dot(xv.segment(c * p, p));
    loss += softplus(-phi * z);
  }
  return loss + 0.5 * lambda_ * xv.squaredNorm();
}

void LogisticObjective::sample_gradient(Index s, const double* x, double* g) const {
  const Index row = rows_[s];
  const Index p = feature_dim();
  const Eigen::Map<const Vector> xv(x, dim());
  Eigen::Map<Vector> gv(g, dim());
  const auto theta = features_->row(row);
  for (int c = 0; c < classes_; ++c) {
    const double phi = labels_[row] == c ? 1.0 : -1.0;
    const double z = theta.dot(xv.segment(c * p, p));
    const double w = -phi * sigmoid(-phi * z);
    gv.segment(c * p, p) = w * theta.transpose() + lambda_ * xv.segment(c * p, p);
  }
}

Smoothness LogisticObjective::smoothness() const {
  double max_sq = 0.0;
  for (Index r : rows_) max_sq = std::max(max_sq, features_->row(r).squaredNorm());
  return {lambda_ + max_sq * static_cast<double>(classes_) / 4.0, lambda_};
}

std::vector<std::pair<std::string, double>> LogisticObjective::parameters() const {
  return {{"n", static_cast<double>(devices())},
          {"m", static_cast<double>(samples_per_device())},
          {"d", static_cast<double>(dim())},
          {"lambda", lambda_},
          {"classes", static_cast<double>(classes_)}};
}

std::shared_ptr<const LogisticObjective> make_logistic(std::shared_ptr<const Matrix> features,
                                                       std::vector<int> labels, double lambda,
                                                       Partition partition, int classes) {
  return std::make_shared<const LogisticObjective>(std::move(features), std::move(labels), lambda,
                                                   std::move(partition), classes);
}

// --- constants ---------------------------------------------------------------

Vector reference_optimum(const FiniteSumObjective& problem, const OptimumOptions& options) {
  if (auto x = problem.closed_form_optimum()) return *x;

  // Nesterov's constant-momentum method for L-smooth, mu-strongly convex f. No line search:
  // Armijo tests stall once f differences reach roundoff, gradient steps do not.
  const Smoothness sm = problem.smoothness();
  if (!(sm.mu > 0.0)) throw std::domain_error("reference optimum needs a strongly convex problem");
  const double sq = std::sqrt(sm.L / sm.mu);
  const double beta = (sq - 1.0) / (sq + 1.0);
  Vector x = Vector::Zero(problem.dim());
  Vector x_prev = x;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Vector y = x + beta * (x - x_prev);
    const Vector g = problem.gradient(y);
    if (g.norm() <= options.tolerance) return y;
    x_prev = std::move(x);
    x = y - g / sm.L;
  }
  if (problem.gradient(x).norm() <= options.tolerance) return x;
  throw std::runtime_error("reference optimum did not reach ||grad f|| <= tolerance");
}

Heterogeneity heterogeneity_constants(const FiniteSumObjective& problem, const Vector& x_star) {
  const Index n = problem.devices();
  const Index m = problem.samples_per_device();
  Heterogeneity out;
  Vector g(problem.dim());
  for (Index i = 0; i < n; ++i) {
    const Vector gi = problem.device_gradient(i, x_star);
    out.zeta_star += gi.squaredNorm();
    for (Index j = 0; j < m; ++j) {
      problem.sample_gradient(i * m + j, x_star.data(), g.data());
      out.sigma_star += (g - gi).squaredNorm();
    }
  }
  out.zeta_star /= static_cast<double>(n);
  out.sigma_star /= static_cast<double>(n * m);
  return out;
}

Smoothness smoothness_constants(const FiniteSumObjective& problem) { return problem.smoothness(); }

ProblemConstants problem_constants(const FiniteSumObjective& problem, const OptimumOptions& options) {
  ProblemConstants pc;
  const Smoothness sm = problem.smoothness();
  pc.L = sm.L;
  pc.mu = sm.mu;
  pc.x_star = reference_optimum(problem, options);
  const Heterogeneity het = heterogeneity_constants(problem, pc.x_star);
  pc.sigma_star = het.sigma_star;
  pc.zeta_star = het.zeta_star;
  return pc;
}

}  // namespace spp
