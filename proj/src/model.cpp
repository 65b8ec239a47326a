#include "crs/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "crs/errors.hpp"

namespace crs {
namespace {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

Eigen::VectorXd expand(const std::vector<double>& values, std::size_t dim, double fallback, const char* what) {
  if (values.empty()) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), fallback);
  if (values.size() == 1) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dim), values[0]);
  if (values.size() != dim) {
    throw ConfigError(std::string(what) + " has " + std::to_string(values.size()) + " entries, expected " +
                      std::to_string(dim));
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(dim));
}

Eigen::VectorXd labels_of(const Dataset& ds) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(ds.n_rows()));
  for (std::size_t i = 0; i < ds.n_rows(); ++i) y[static_cast<Eigen::Index>(i)] = ds.outcome()[i];
  return y;
}

void check_dims(const Bitset& coverage, const Weights& w, const Dataset& ds) {
  if (coverage.size() != ds.n_rows()) throw std::invalid_argument("coverage length does not match the dataset");
  if (static_cast<std::size_t>(w.v.size()) != ds.n_conditions() + 1) {
    throw std::invalid_argument("weight vector does not match the dataset columns");
  }
}

}  // namespace

void Hyperparams::validate() const {
  if (alpha.empty() || alpha.size() != beta.size()) {
    throw ConfigError("alpha and beta need one entry per rule length");
  }
  for (std::size_t l = 0; l < alpha.size(); ++l) {
    if (!(alpha[l] > 0.0) || !(beta[l] > 0.0)) throw ConfigError("alpha and beta must be positive");
  }
  for (double s : prior_variance) {
    if (!(s > 0.0)) throw ConfigError("prior variances must be positive");
  }
}

Eigen::VectorXd Hyperparams::mean(std::size_t dim) const { return expand(prior_mean, dim, 0.0, "prior_mean"); }

Eigen::VectorXd Hyperparams::precision(std::size_t dim) const {
  return expand(prior_variance, dim, 1.0, "prior_variance").cwiseInverse();
}

Hyperparams Hyperparams::for_pool(std::span<const std::size_t> pool_sizes, double alpha, double beta_scale) {
  Hyperparams h;
  for (auto size : pool_sizes) {
    h.alpha.push_back(alpha);
    h.beta.push_back(beta_scale * static_cast<double>(std::max<std::size_t>(size, 1)));
  }
  h.validate();
  return h;
}

Weights Weights::zeros(std::size_t n_columns) {
  Weights w;
  w.v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_columns));
  return w;
}

Weights Weights::unpack(const Eigen::VectorXd& packed) {
  if (packed.size() < 4) throw std::invalid_argument("packed weights too short");
  Weights w;
  const Eigen::Index k = packed.size() - 3;
  w.v = packed.head(k);
  w.gamma0 = packed[k];
  w.gamma1 = packed[k + 1];
  w.gamma2 = packed[k + 2];
  return w;
}

Eigen::VectorXd Weights::packed() const {
  Eigen::VectorXd out(v.size() + 3);
  out << v, gamma0, gamma1, gamma2;
  return out;
}

Bitset coverage(std::span<const std::size_t> rule_ids, const CandidatePool& pool) {
  Bitset out(pool.n_rows());
  for (auto id : rule_ids) {
    if (id >= pool.size()) throw std::out_of_range("unknown rule id " + std::to_string(id));
    out |= pool.coverage(id);
  }
  return out;
}

std::vector<std::size_t> length_counts(std::span<const std::size_t> rule_ids, const CandidatePool& pool) {
  std::vector<std::size_t> counts(pool.max_length(), 0);
  for (auto id : rule_ids) {
    if (id >= pool.size()) throw std::out_of_range("unknown rule id " + std::to_string(id));
    ++counts[pool.length_of(id) - 1];
  }
  return counts;
}

double log_prior(std::span<const std::size_t> counts, const Hyperparams& h, std::span<const std::size_t> pool_sizes) {
  if (counts.size() != h.max_length() || pool_sizes.size() != h.max_length()) {
    throw std::invalid_argument("per-length counts do not match the hyperparameters");
  }
  double total = 0.0;
  for (std::size_t l = 0; l < counts.size(); ++l) {
    if (counts[l] > pool_sizes[l]) {
      throw std::invalid_argument("M_" + std::to_string(l + 1) + " exceeds the pool size");
    }
    const auto m = static_cast<double>(counts[l]);
    const auto size = static_cast<double>(pool_sizes[l]);
    total += log_beta(m + h.alpha[l], size - m + h.beta[l]);
  }
  return total;
}

Eigen::MatrixXd design_matrix(const Dataset& ds, const Bitset& coverage) {
  const auto n = static_cast<Eigen::Index>(ds.n_rows());
  const Eigen::Index p = ds.x().cols();
  Eigen::MatrixXd z(n, p + 3);
  z.leftCols(p) = ds.x();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = ds.treatment()[static_cast<std::size_t>(i)];
    const double a = coverage.test(static_cast<std::size_t>(i)) ? 1.0 : 0.0;
    z(i, p) = t;
    z(i, p + 1) = a;
    z(i, p + 2) = t * a;
  }
  return z;
}

double log_theta(const Bitset& coverage, const Weights& w, const Dataset& ds, const Hyperparams& h) {
  check_dims(coverage, w, ds);
  const Eigen::MatrixXd z = design_matrix(ds, coverage);
  const Eigen::VectorXd y = labels_of(ds);
  const auto dim = static_cast<std::size_t>(z.cols());
  const Eigen::VectorXd mean = h.mean(dim);
  const Eigen::VectorXd precision = h.precision(dim);
  return PenalizedLogistic{z, y, mean, precision}.value(w.packed());
}

Eigen::VectorXd log_theta_gradient(const Bitset& coverage, const Weights& w, const Dataset& ds,
                                   const Hyperparams& h) {
  check_dims(coverage, w, ds);
  const Eigen::MatrixXd z = design_matrix(ds, coverage);
  const Eigen::VectorXd y = labels_of(ds);
  const auto dim = static_cast<std::size_t>(z.cols());
  const Eigen::VectorXd mean = h.mean(dim);
  const Eigen::VectorXd precision = h.precision(dim);
  return PenalizedLogistic{z, y, mean, precision}.gradient(w.packed());
}

WeightFit fit_weights(const Bitset& coverage, const Dataset& ds, const Hyperparams& h, const Weights* warm_start,
                      const NewtonOptions& options) {
  const Eigen::MatrixXd z = design_matrix(ds, coverage);
  const Eigen::VectorXd y = labels_of(ds);
  const auto dim = static_cast<std::size_t>(z.cols());
  const Eigen::VectorXd mean = h.mean(dim);
  const Eigen::VectorXd precision = h.precision(dim);
  Eigen::VectorXd start = Eigen::VectorXd::Zero(z.cols());
  if (warm_start != nullptr) {
    check_dims(coverage, *warm_start, ds);
    start = warm_start->packed();
  }
  const LogisticFit fit = fit_penalized_logistic(PenalizedLogistic{z, y, mean, precision}, std::move(start), options);
  WeightFit out;
  out.weights = Weights::unpack(fit.coef);
  out.log_theta = fit.objective;
  out.grad_norm = fit.grad_norm;
  out.iterations = fit.iterations;
  out.converged = fit.converged;
  return out;
}

double objective_f(std::span<const std::size_t> rule_ids, const Weights& w, const Dataset& ds, const Hyperparams& h,
                   const CandidatePool& pool) {
  const auto counts = length_counts(rule_ids, pool);
  return log_theta(coverage(rule_ids, pool), w, ds, h) + log_prior(counts, h, pool.sizes());
}

RuleSetModel fit_rule_set(std::span<const std::size_t> rule_ids, const Dataset& ds, const Hyperparams& h,
                          const CandidatePool& pool, const Weights* warm_start) {
  RuleSetModel model;
  model.rule_ids.assign(rule_ids.begin(), rule_ids.end());
  std::sort(model.rule_ids.begin(), model.rule_ids.end());
  model.per_length = length_counts(model.rule_ids, pool);
  model.coverage = coverage(model.rule_ids, pool);
  const WeightFit fit = fit_weights(model.coverage, ds, h, warm_start);
  model.weights = fit.weights;
  model.log_theta = fit.log_theta;
  model.log_prior = log_prior(model.per_length, h, pool.sizes());
  model.log_f = model.log_theta + model.log_prior;
  model.converged = fit.converged;
  if (!std::isfinite(model.log_f)) throw NumericalError("non-finite objective for a rule set");
  return model;
}

Bitset ideal_coverage(const Dataset& ds) {
  return (ds.treated_rows() ^ ds.positive_rows()).complement();
}

WeightFit ideal_fit(const Dataset& ds, const Hyperparams& h) { return fit_weights(ideal_coverage(ds), ds, h); }

double ideal_theta(const Dataset& ds, const Hyperparams& h) { return ideal_fit(ds, h).log_theta; }

nlohmann::json model_to_json(const RuleSetModel& model, const CandidatePool& pool, const Dataset& ds) {
  nlohmann::json rules = nlohmann::json::array();
  for (auto id : model.rule_ids) {
    const PoolRule& r = pool.at(id);
    rules.push_back({{"pool_id", id}, {"conditions", r.rule.condition_strings(ds)}, {"columns", r.rule.columns}});
  }
  std::vector<double> v(model.weights.v.data(), model.weights.v.data() + model.weights.v.size());
  std::vector<std::string> v_names;
  for (std::size_t c = 0; c <= ds.n_conditions(); ++c) v_names.push_back(ds.describe_column(c));
  return {
      {"rules", rules},
      {"n_rules", model.rule_ids.size()},
      {"rules_per_length", model.per_length},
      {"weights",
       {{"v", v}, {"v_columns", v_names}, {"gamma0", model.weights.gamma0}, {"gamma1", model.weights.gamma1},
        {"gamma2", model.weights.gamma2}}},
      {"log_theta", model.log_theta},
      {"log_prior", model.log_prior},
      {"logF", model.log_f},
      {"coverage_fraction", static_cast<double>(model.coverage.count()) / static_cast<double>(model.coverage.size())},
      {"sign_conditions",
       {{"gamma1_nonpositive", model.weights.gamma1 <= 0.0},
        {"gamma1_plus_gamma2_nonnegative", model.weights.gamma1 + model.weights.gamma2 >= 0.0}}},
      {"fit_converged", model.converged},
  };
}

}  // namespace crs
