#pragma once

#include <Eigen/Dense>

namespace crs {

/// log(sigmoid(eta)) without overflow for large |eta|.
double log_sigmoid(double eta);
double sigmoid(double eta);

/// Gaussian-penalized logistic log-likelihood:
///   sum_i [y_i log s(z_i.w) + (1-y_i) log(1 - s(z_i.w))] - 1/2 sum_j precision_j (w_j - mean_j)^2
/// The Gaussian normalizing constant is omitted.
struct PenalizedLogistic {
  const Eigen::MatrixXd& design;
  const Eigen::VectorXd& labels;
  const Eigen::VectorXd& mean;
  const Eigen::VectorXd& precision;

  double value(const Eigen::VectorXd& w) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& w) const;
};

struct NewtonOptions {
  double grad_tol = 1e-6;
  int max_iter = 200;
};

struct LogisticFit {
  Eigen::VectorXd coef;
  double objective = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;  // grad_norm < grad_tol; otherwise the iteration cap (or a stalled line search) stopped it
};

/// Newton ascent with step halving. Falls back to a gradient step when the
/// Newton system cannot be factored. Throws NumericalError on a non-finite objective.
LogisticFit fit_penalized_logistic(const PenalizedLogistic& problem, Eigen::VectorXd start,
                                   const NewtonOptions& options = {});

}  // namespace crs
