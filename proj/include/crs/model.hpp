#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "crs/bitset.hpp"
#include "crs/data.hpp"
#include "crs/logistic.hpp"
#include "crs/mining.hpp"

namespace crs {

/// Rule-set prior (per-length Beta-Bernoulli) and Gaussian weight prior.
struct Hyperparams {
  std::vector<double> alpha;  // alpha_l, l = 1..L
  std::vector<double> beta;   // beta_l
  std::vector<double> prior_mean;      // empty: zeros; one value: broadcast; else one per weight
  std::vector<double> prior_variance;  // empty: ones; one value: broadcast; else one per weight

  std::size_t max_length() const { return alpha.size(); }
  void validate() const;
  Eigen::VectorXd mean(std::size_t dim) const;
  Eigen::VectorXd precision(std::size_t dim) const;

  /// alpha_l = alpha, beta_l = beta_scale * max(|A_l|, 1).
  static Hyperparams for_pool(std::span<const std::size_t> pool_sizes, double alpha, double beta_scale);
};

/// Coefficients of the outcome model
///   logit p(y=1) = v.x + gamma0 T + gamma1 A(x) + gamma2 T A(x).
struct Weights {
  Eigen::VectorXd v;  // J + 1, intercept last
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;

  static Weights zeros(std::size_t n_columns);
  static Weights unpack(const Eigen::VectorXd& packed);
  Eigen::VectorXd packed() const;

  /// gamma1 <= 0 and gamma1 + gamma2 >= 0: the premise of the ideal-set and size bounds.
  bool sign_conditions() const { return gamma1 <= 0.0 && gamma1 + gamma2 >= 0.0; }
};

struct WeightFit {
  Weights weights;
  double log_theta = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;  // gradient norm below tolerance (else the iteration cap was hit)
};

struct RuleSetModel {
  std::vector<std::size_t> rule_ids;  // ascending pool ids
  std::vector<std::size_t> per_length;
  Bitset coverage;
  Weights weights;
  double log_theta = 0.0;
  double log_prior = 0.0;
  double log_f = 0.0;
  bool converged = false;
};

Bitset coverage(std::span<const std::size_t> rule_ids, const CandidatePool& pool);
std::vector<std::size_t> length_counts(std::span<const std::size_t> rule_ids, const CandidatePool& pool);

/// sum_l log B(M_l + alpha_l, |A_l| - M_l + beta_l), normalizing constant dropped.
double log_prior(std::span<const std::size_t> counts, const Hyperparams& h, std::span<const std::size_t> pool_sizes);

/// [X | T | A | T*A]
Eigen::MatrixXd design_matrix(const Dataset& ds, const Bitset& coverage);

/// Bernoulli log-likelihood plus unnormalized Gaussian log-density of the weights.
double log_theta(const Bitset& coverage, const Weights& w, const Dataset& ds, const Hyperparams& h);
Eigen::VectorXd log_theta_gradient(const Bitset& coverage, const Weights& w, const Dataset& ds,
                                   const Hyperparams& h);

/// MAP weights for a fixed coverage. Starts from `warm_start` when given, else zero.
WeightFit fit_weights(const Bitset& coverage, const Dataset& ds, const Hyperparams& h,
                      const Weights* warm_start = nullptr, const NewtonOptions& options = {});

double objective_f(std::span<const std::size_t> rule_ids, const Weights& w, const Dataset& ds,
                   const Hyperparams& h, const CandidatePool& pool);

/// Fits weights for the rule set and evaluates the objective.
RuleSetModel fit_rule_set(std::span<const std::size_t> rule_ids, const Dataset& ds, const Hyperparams& h,
                          const CandidatePool& pool, const Weights* warm_start = nullptr);

/// Coverage of the ideal set: rows with T_i == y_i.
Bitset ideal_coverage(const Dataset& ds);
WeightFit ideal_fit(const Dataset& ds, const Hyperparams& h);
/// log Theta of the ideal coverage at its fitted weights.
double ideal_theta(const Dataset& ds, const Hyperparams& h);

nlohmann::json model_to_json(const RuleSetModel& model, const CandidatePool& pool, const Dataset& ds);

}  // namespace crs
