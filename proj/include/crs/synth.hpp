#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "crs/bitset.hpp"
#include "crs/data.hpp"
#include "crs/mining.hpp"
#include "crs/model.hpp"
#include "crs/search.hpp"

namespace crs {

struct SyntheticSpec {
  std::size_t n = 2000;
  std::size_t j = 50;
  std::size_t n_true_rules = 5;
  std::size_t pool_size_m = 5000;
  std::uint64_t seed = 0;
  std::size_t bins = 3;
  double min_support = 0.05;
  std::size_t max_length = 3;
  double min_subgroup = 0.05;  // accepted range for the planted subgroup's share of rows
  double max_subgroup = 0.50;

  void validate() const;
};

struct SyntheticData {
  Dataset data;                  // binarized features, T, observed y
  std::vector<Rule> true_rules;  // condition columns of `data`
  Bitset true_coverage;
  std::vector<std::uint8_t> y0;
  std::vector<std::uint8_t> y1;
};

/// Gaussian features, fair-coin treatment, thresholded logistic control
/// outcome, and a planted rule set on which treatment always succeeds.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

Bitset rules_coverage(std::span<const Rule> rules, const Dataset& ds);

/// Fraction of rows whose subgroup membership differs.
double recovery_error(const Bitset& found, const Bitset& truth);

struct RecoverySettings {
  MiningConfig mining;        // screen.top_m is overridden by SyntheticSpec::pool_size_m
  SearchParams search;
  std::vector<double> prior_mean;
  std::vector<double> prior_variance;
  double test_fraction = 0.3;
  std::size_t threads = 1;
};

struct RecoveryRun {
  std::uint64_t seed = 0;
  std::vector<double> errors;   // test error of the best-so-far model after each iteration
  std::vector<double> elapsed;  // seconds since the search started
  double mining_seconds = 0.0;
  std::size_t pool_size = 0;
  double true_share = 0.0;      // planted subgroup share of test rows
  std::vector<std::size_t> best_rule_ids;
  RuleSetModel best;
  std::vector<TraceRow> trace;
};

struct RecoveryReport {
  std::vector<RecoveryRun> runs;
  std::vector<double> mean_error;  // per iteration
  std::vector<double> std_error;
  double mean_final_error = 0.0;
  double std_final_error = 0.0;
  double mean_iterations_to_005 = 0.0;  // over runs that reach error < 0.05
  std::size_t runs_reaching_005 = 0;
};

/// Repeats: fresh data (seed + i), 70/30 split, mining on train with
/// alpha_l = 1 and beta_l = |A_l|, annealed search, and the test error of the
/// best-so-far model at every iteration.
RecoveryReport run_recovery_experiment(const SyntheticSpec& spec, const RecoverySettings& settings,
                                       std::size_t n_repeats);

RecoveryRun run_recovery_once(const SyntheticSpec& spec, const RecoverySettings& settings);

}  // namespace crs
