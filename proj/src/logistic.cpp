#include "crs/logistic.hpp"

#include <cmath>

#include "crs/errors.hpp"

namespace crs {

double log_sigmoid(double eta) {
  if (eta >= 0.0) return -std::log1p(std::exp(-eta));
  return eta - std::log1p(std::exp(eta));
}

double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

double PenalizedLogistic::value(const Eigen::VectorXd& w) const {
  const Eigen::VectorXd eta = design * w;
  double total = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // log(1 - s(eta)) = log s(-eta)
    total += labels[i] > 0.5 ? log_sigmoid(eta[i]) : log_sigmoid(-eta[i]);
  }
  const Eigen::VectorXd diff = w - mean;
  total -= 0.5 * (precision.array() * diff.array().square()).sum();
  return total;
}

Eigen::VectorXd PenalizedLogistic::gradient(const Eigen::VectorXd& w) const {
  const Eigen::VectorXd eta = design * w;
  Eigen::VectorXd residual(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) residual[i] = labels[i] - sigmoid(eta[i]);
  Eigen::VectorXd g = design.transpose() * residual;
  g.array() -= precision.array() * (w - mean).array();
  return g;
}

namespace {

// Solves (Z' W Z + diag(precision)) d = g. Uses the Woodbury identity when
// there are fewer rows than columns.
bool newton_direction(const Eigen::MatrixXd& z, const Eigen::VectorXd& weights,
                      const Eigen::VectorXd& precision, const Eigen::VectorXd& g, Eigen::VectorXd& d) {
  const Eigen::Index n = z.rows();
  const Eigen::Index p = z.cols();
  const Eigen::VectorXd root_w = weights.array().sqrt();
  if (n >= p) {
    const Eigen::MatrixXd zw = root_w.asDiagonal() * z;
    Eigen::MatrixXd h = precision.asDiagonal();
    h.selfadjointView<Eigen::Lower>().rankUpdate(zw.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) return false;
    d = llt.solve(g);
  } else {
    // H^-1 = D^-1 - D^-1 Z' S (I + S Z D^-1 Z' S)^-1 S Z D^-1, S = W^(1/2)
    const Eigen::VectorXd inv_prec = precision.cwiseInverse();
    const Eigen::MatrixXd sz = root_w.asDiagonal() * z;          // n x p
    const Eigen::MatrixXd szd = sz * inv_prec.asDiagonal();      // n x p
    Eigen::MatrixXd inner = Eigen::MatrixXd::Identity(n, n);
    inner.noalias() += szd * sz.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(inner);
    if (llt.info() != Eigen::Success) return false;
    const Eigen::VectorXd dg = inv_prec.cwiseProduct(g);
    d = dg - szd.transpose() * llt.solve(sz * dg);
  }
  return d.allFinite();
}

}  // namespace

LogisticFit fit_penalized_logistic(const PenalizedLogistic& problem, Eigen::VectorXd start,
                                   const NewtonOptions& options) {
  const Eigen::MatrixXd& z = problem.design;
  LogisticFit fit;
  fit.coef = std::move(start);
  fit.objective = problem.value(fit.coef);
  if (!std::isfinite(fit.objective)) throw NumericalError("non-finite objective at the starting point");

  Eigen::VectorXd eta(z.rows());
  Eigen::VectorXd weights(z.rows());
  for (fit.iterations = 0; fit.iterations < options.max_iter; ++fit.iterations) {
    eta.noalias() = z * fit.coef;
    Eigen::VectorXd residual(z.rows());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double s = sigmoid(eta[i]);
      residual[i] = problem.labels[i] - s;
      weights[i] = s * (1.0 - s);
    }
    Eigen::VectorXd g = z.transpose() * residual;
    g.array() -= problem.precision.array() * (fit.coef - problem.mean).array();
    fit.grad_norm = g.norm();
    if (!std::isfinite(fit.grad_norm)) throw NumericalError("non-finite gradient during weight fit");
    if (fit.grad_norm < options.grad_tol) {
      fit.converged = true;
      return fit;
    }

    Eigen::VectorXd direction;
    if (!newton_direction(z, weights, problem.precision, g, direction)) direction = g;

    // Step halving: accept the first step that does not decrease the objective.
    double step = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
      Eigen::VectorXd candidate = fit.coef + step * direction;
      const double value = problem.value(candidate);
      if (!std::isfinite(value)) continue;
      if (value >= fit.objective) {
        accepted = value > fit.objective || candidate != fit.coef;
        fit.coef = std::move(candidate);
        fit.objective = value;
        break;
      }
    }
    if (!accepted) break;  // stalled at floating-point resolution
  }
  fit.grad_norm = problem.gradient(fit.coef).norm();
  fit.converged = fit.grad_norm < options.grad_tol;
  if (!std::isfinite(fit.objective)) throw NumericalError("non-finite objective during weight fit");
  return fit;
}

}  // namespace crs
