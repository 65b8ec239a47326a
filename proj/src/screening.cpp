#include "crs/screening.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "crs/errors.hpp"
#include "crs/logistic.hpp"

namespace crs {

TTestResult welch_ttest_moments(double mean_a, double var_a, double n_a, double mean_b, double var_b,
                                double n_b) {
  TTestResult result;
  if (n_a < 2.0 || n_b < 2.0 || (var_a <= 0.0 && var_b <= 0.0)) {
    result.t = std::numeric_limits<double>::quiet_NaN();
    result.p = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  const double sa = var_a / n_a;
  const double sb = var_b / n_b;
  const double se2 = sa + sb;
  result.t = (mean_a - mean_b) / std::sqrt(se2);
  result.df = se2 * se2 / (sa * sa / (n_a - 1.0) + sb * sb / (n_b - 1.0));
  const boost::math::students_t dist(result.df);
  result.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(result.t))));
  result.conclusive = true;
  return result;
}

TTestResult welch_ttest(std::span<const double> a, std::span<const double> b) {
  auto moments = [](std::span<const double> s) {
    const double n = static_cast<double>(s.size());
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    return std::pair{mean, s.size() > 1 ? ss / (n - 1.0) : 0.0};
  };
  if (a.size() < 2 || b.size() < 2) return welch_ttest_moments(0, 0, static_cast<double>(a.size()), 0, 0, static_cast<double>(b.size()));
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  return welch_ttest_moments(ma, va, static_cast<double>(a.size()), mb, vb, static_cast<double>(b.size()));
}

ValidityResult validity_check(const Bitset& coverage, const Dataset& ds, const ValidityOptions& options) {
  ValidityResult result;
  const Bitset treated = coverage & ds.treated_rows();
  Bitset control = coverage;
  control.subtract(ds.treated_rows());
  const double n1 = static_cast<double>(treated.count());
  const double n0 = static_cast<double>(control.count());
  if (n1 < 2.0 || n0 < 2.0) {
    result.min_p = 0.0;
    return result;
  }

  auto binary_var = [](double ones, double n) { return ones * (n - ones) / (n * (n - 1.0)); };
  for (std::size_t c = 0; c < ds.n_conditions(); ++c) {
    const double s1 = static_cast<double>(Bitset::count_and(treated, ds.column_bits(c)));
    const double s0 = static_cast<double>(Bitset::count_and(control, ds.column_bits(c)));
    const double m1 = s1 / n1;
    const double m0 = s0 / n0;
    const double v1 = binary_var(s1, n1);
    const double v0 = binary_var(s0, n0);
    if (v1 == 0.0 && v0 == 0.0) {
      if (m1 == m0) continue;
      result.min_p = 0.0;
      ++result.n_tested;
      continue;
    }
    const TTestResult t = welch_ttest_moments(m1, v1, n1, m0, v0, n0);
    result.min_p = std::min(result.min_p, t.p);
    ++result.n_tested;
  }
  double threshold = options.alpha;
  if (options.correction == MultipleTesting::bonferroni && result.n_tested > 0) {
    threshold /= static_cast<double>(result.n_tested);
  }
  result.pass = result.min_p > threshold;
  return result;
}

namespace {

std::vector<double> propensity_scores(std::span<const std::size_t> rows, const Dataset& ds, double l2) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  // Keep covariates that vary on the covered rows, plus the intercept.
  std::vector<Eigen::Index> columns;
  for (std::size_t c = 0; c < ds.n_conditions(); ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    const double first = ds.x()(static_cast<Eigen::Index>(rows[0]), col);
    for (auto r : rows) {
      if (ds.x()(static_cast<Eigen::Index>(r), col) != first) {
        columns.push_back(col);
        break;
      }
    }
  }
  columns.push_back(static_cast<Eigen::Index>(ds.intercept_column()));

  const auto p = static_cast<Eigen::Index>(columns.size());
  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd labels(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto src = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    for (Eigen::Index k = 0; k < p; ++k) design(i, k) = ds.x()(src, columns[static_cast<std::size_t>(k)]);
    labels[i] = ds.treatment()[rows[static_cast<std::size_t>(i)]];
  }
  const Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd precision = Eigen::VectorXd::Constant(p, l2);
  precision[p - 1] = 1e-6;  // intercept left effectively unpenalized
  const PenalizedLogistic problem{design, labels, mean, precision};
  NewtonOptions options;
  options.max_iter = 50;
  const LogisticFit fit = fit_penalized_logistic(problem, Eigen::VectorXd::Zero(p), options);

  std::vector<double> scores(rows.size());
  const Eigen::VectorXd eta = design * fit.coef;
  for (Eigen::Index i = 0; i < n; ++i) scores[static_cast<std::size_t>(i)] = sigmoid(eta[i]);
  return scores;
}

}  // namespace

double matched_ate(const Bitset& coverage, const Dataset& ds, double l2) {
  const std::vector<std::size_t> rows = coverage.indices();
  std::size_t n_treated = 0;
  for (auto r : rows) n_treated += ds.treatment()[r];
  if (n_treated == 0 || n_treated == rows.size()) {
    throw DataError("matched ATE needs at least one treated and one control row");
  }
  const std::vector<double> scores = propensity_scores(rows, ds, l2);

  struct Control {
    double score;
    double y;
  };
  std::vector<Control> controls;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (!ds.treatment()[rows[k]]) controls.push_back({scores[k], static_cast<double>(ds.outcome()[rows[k]])});
  }
  std::stable_sort(controls.begin(), controls.end(),
                   [](const Control& a, const Control& b) { return a.score < b.score; });

  constexpr double kTie = 1e-10;
  double total = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (!ds.treatment()[rows[k]]) continue;
    const double s = scores[k];
    const auto it = std::lower_bound(controls.begin(), controls.end(), s,
                                     [](const Control& c, double v) { return c.score < v; });
    double best = std::numeric_limits<double>::infinity();
    if (it != controls.end()) best = it->score - s;
    if (it != controls.begin()) best = std::min(best, s - std::prev(it)->score);
    // Average the outcome over all controls tied at the nearest distance.
    double sum = 0.0;
    double count = 0.0;
    for (auto jt = it; jt != controls.end() && jt->score - s <= best + kTie; ++jt) {
      sum += jt->y;
      count += 1.0;
    }
    for (auto jt = it; jt != controls.begin();) {
      --jt;
      if (s - jt->score > best + kTie) break;
      sum += jt->y;
      count += 1.0;
    }
    total += static_cast<double>(ds.outcome()[rows[k]]) - sum / count;
  }
  return total / static_cast<double>(n_treated);
}

}  // namespace crs
