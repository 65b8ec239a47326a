#pragma once

#include <cstddef>
#include <span>

#include "crs/bitset.hpp"
#include "crs/data.hpp"

namespace crs {

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
  bool conclusive = false;  // false: a sample has < 2 values or both variances are zero
};

/// Two-sided Welch (unequal variance) t-test.
TTestResult welch_ttest(std::span<const double> a, std::span<const double> b);
TTestResult welch_ttest_moments(double mean_a, double var_a, double n_a, double mean_b, double var_b,
                                double n_b);

/// Default ridge precision of the matching propensity model.
inline constexpr double kPropensityL2 = 1e4;

enum class MultipleTesting { none, bonferroni };

struct ValidityOptions {
  double alpha = 0.05;
  MultipleTesting correction = MultipleTesting::bonferroni;
};

struct ValidityResult {
  bool pass = false;
  double min_p = 1.0;         // smallest per-covariate p value (0 for a degenerate imbalance)
  std::size_t n_tested = 0;   // covariates that were actually tested
};

/// Balance check on the covered rows: per-covariate Welch test between covered
/// treated and covered control rows. Passes when no covariate shows a
/// significant difference. Covariates constant and equal in both arms carry no
/// evidence and are skipped; constant but different is a failure.
ValidityResult validity_check(const Bitset& coverage, const Dataset& ds, const ValidityOptions& options = {});

/// Propensity-matched treatment effect on the covered rows: L2 logistic
/// propensity model, 1-nearest-neighbour matching with replacement (ties averaged),
/// mean over treated rows of y_i - y_match(i). Throws DataError when an arm is empty.
double matched_ate(const Bitset& coverage, const Dataset& ds, double l2 = kPropensityL2);

}  // namespace crs
