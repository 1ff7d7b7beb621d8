#pragma once

#include "spp/common.hpp"

#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace spp {

struct Smoothness {
  double L = 0.0;
  double mu = 0.0;
};

struct Heterogeneity {
  double sigma_star = 0.0;  // (1/M) sum_ij ||grad f_ij(x*) - grad f_i(x*)||^2
  double zeta_star = 0.0;   // (1/n) sum_i ||grad f_i(x*)||^2
};

struct ProblemConstants {
  double L = 0.0;
  double mu = 0.0;
  double sigma_star = 0.0;
  double zeta_star = 0.0;
  Vector x_star;
};

/// f(x) = (1/n) sum_i (1/m) sum_j f_ij(x). Samples are addressed by global row s = i*m + j.
class FiniteSumObjective {
 public:
  virtual ~FiniteSumObjective() = default;

  Index devices() const { return n_; }
  Index samples_per_device() const { return m_; }
  Index total_samples() const { return n_ * m_; }
  Index dim() const { return d_; }

  virtual double sample_value(Index s, const double* x) const = 0;
  /// Writes grad f_s(x) into g (length d).
  virtual void sample_gradient(Index s, const double* x, double* g) const = 0;
  virtual Smoothness smoothness() const = 0;
  virtual std::optional<Vector> closed_form_optimum() const { return std::nullopt; }
  virtual std::string kind() const = 0;
  virtual std::vector<std::pair<std::string, double>> parameters() const = 0;

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  double device_value(Index i, const Vector& x) const;
  Vector device_gradient(Index i, const Vector& x) const;
  Vector sample_gradient(Index s, const Vector& x) const;

 protected:
  FiniteSumObjective(Index n, Index m, Index d);

 private:
  Index n_, m_, d_;
};

/// f_s(x) = 1/2 sum_t h_t (x_t - a_st)^2 + (mu_reg/2) ||x||^2, h = 1 unless a curvature is given.
class QuadraticObjective final : public FiniteSumObjective {
 public:
  QuadraticObjective(Matrix anchors, Index n, Index m, double mu_reg, Vector curvature);

  double sample_value(Index s, const double* x) const override;
  void sample_gradient(Index s, const double* x, double* g) const override;
  using FiniteSumObjective::sample_gradient;
  Smoothness smoothness() const override;
  std::optional<Vector> closed_form_optimum() const override;
  std::string kind() const override { return "quadratic"; }
  std::vector<std::pair<std::string, double>> parameters() const override;

  const Matrix& anchors() const { return anchors_; }
  const Vector& curvature() const { return h_; }
  double mu_reg() const { return mu_reg_; }

 private:
  Matrix anchors_;
  Vector h_;
  double mu_reg_;
};

std::shared_ptr<const QuadraticObjective> make_quadratic(Matrix anchors, Index n, Index m,
                                                         double mu_reg,
                                                         std::optional<Vector> curvature = {});

/// One binary logistic channel per class over shared features; x is class-major
/// (block c holds the weights of class c).
class LogisticObjective final : public FiniteSumObjective {
 public:
  LogisticObjective(std::shared_ptr<const Matrix> features, std::vector<int> labels, double lambda,
                    Partition partition, int classes);

  double sample_value(Index s, const double* x) const override;
  void sample_gradient(Index s, const double* x, double* g) const override;
  using FiniteSumObjective::sample_gradient;
  Smoothness smoothness() const override;
  std::string kind() const override { return "logistic"; }
  std::vector<std::pair<std::string, double>> parameters() const override;

  int classes() const { return classes_; }
  Index feature_dim() const { return features_->cols(); }
  double lambda() const { return lambda_; }
  Index dataset_row(Index s) const { return rows_[s]; }

 private:
  std::shared_ptr<const Matrix> features_;
  std::vector<int> labels_;
  double lambda_;
  std::vector<Index> rows_;  // global sample -> dataset row
  int classes_;
};

std::shared_ptr<const LogisticObjective> make_logistic(std::shared_ptr<const Matrix> features,
                                                       std::vector<int> labels, double lambda,
                                                       Partition partition, int classes = 10);

struct OptimumOptions {
  double tolerance = 1e-10;
  int max_iterations = 200000;
};

/// Closed form when available, otherwise accelerated full-batch gradient descent (needs mu > 0).
Vector reference_optimum(const FiniteSumObjective& problem, const OptimumOptions& options = {});

Heterogeneity heterogeneity_constants(const FiniteSumObjective& problem, const Vector& x_star);
Smoothness smoothness_constants(const FiniteSumObjective& problem);
ProblemConstants problem_constants(const FiniteSumObjective& problem,
                                   const OptimumOptions& options = {});

}  // namespace spp
