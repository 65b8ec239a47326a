#include "crs/synth.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "crs/errors.hpp"
#include "crs/parallel.hpp"

namespace crs {

void SyntheticSpec::validate() const {
  if (n < 1 || j < 1) throw ConfigError("synthetic n and J must be at least 1");
  if (n_true_rules < 1) throw ConfigError("synthetic data needs at least one true rule");
  if (n_true_rules > pool_size_m) throw ConfigError("n_true_rules must not exceed pool_size_m");
  if (!(min_subgroup >= 0.0 && min_subgroup <= max_subgroup && max_subgroup <= 1.0)) {
    throw ConfigError("invalid subgroup share range");
  }
}

Bitset rules_coverage(std::span<const Rule> rules, const Dataset& ds) {
  Bitset out(ds.n_rows());
  for (const auto& rule : rules) out |= rule_coverage(rule, ds);
  return out;
}

double recovery_error(const Bitset& found, const Bitset& truth) {
  if (found.size() != truth.size()) throw std::invalid_argument("coverage lengths differ");
  if (found.size() == 0) return 0.0;
  return static_cast<double>((found ^ truth).count()) / static_cast<double>(found.size());
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution fair(0.5);

  RawTable table;
  table.n_rows = spec.n;
  for (std::size_t c = 0; c < spec.j; ++c) {
    RawAttribute attr;
    attr.name = "f" + std::to_string(c);
    attr.kind = AttributeKind::numeric;
    attr.numeric.resize(spec.n);
    table.attributes.push_back(std::move(attr));
    table.column_names.push_back(table.attributes.back().name);
  }
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (auto& attr : table.attributes) attr.numeric[i] = normal(rng);
  }
  std::vector<std::uint8_t> treatment(spec.n);
  for (auto& t : treatment) t = fair(rng) ? 1 : 0;
  std::vector<double> v(spec.j + 1);
  for (auto& coef : v) coef = normal(rng);

  // y0 = 1 iff sigmoid(v . [x, 1]) >= 0.5
  std::vector<std::uint8_t> y0(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    double eta = v[spec.j];
    for (std::size_t c = 0; c < spec.j; ++c) eta += v[c] * table.attributes[c].numeric[i];
    y0[i] = eta >= 0.0 ? 1 : 0;
  }
  table.treatment = treatment;
  table.outcome = y0;
  const Dataset features = binarize(table, spec.bins);

  std::vector<std::size_t> all(spec.n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto itemsets = fp_growth(transactions_from(features, all), spec.min_support, spec.max_length);
  if (itemsets.size() < spec.n_true_rules) {
    throw DataError("mining produced " + std::to_string(itemsets.size()) + " rules, fewer than the " +
                    std::to_string(spec.n_true_rules) + " true rules requested (raise n or lower the support)");
  }

  std::vector<std::size_t> itemset_ids(itemsets.size());
  std::iota(itemset_ids.begin(), itemset_ids.end(), std::size_t{0});
  SyntheticData out;
  bool found = false;
  for (int attempt = 0; attempt < 1000 && !found; ++attempt) {
    std::vector<std::size_t> chosen;
    std::sample(itemset_ids.begin(), itemset_ids.end(), std::back_inserter(chosen),
                static_cast<std::ptrdiff_t>(spec.n_true_rules), rng);
    std::vector<Rule> rules;
    for (auto k : chosen) rules.push_back(Rule{itemsets[k].items});
    const Bitset cover = rules_coverage(rules, features);
    const double share = static_cast<double>(cover.count()) / static_cast<double>(spec.n);
    if (share >= spec.min_subgroup && share <= spec.max_subgroup) {
      out.true_rules = std::move(rules);
      out.true_coverage = cover;
      found = true;
    }
  }
  if (!found) throw DataError("could not draw a true rule set covering the requested share of rows");

  out.y0 = y0;
  out.y1 = y0;
  std::vector<std::uint8_t> observed(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    if (out.true_coverage.test(i)) out.y1[i] = 1;
    observed[i] = treatment[i] ? out.y1[i] : out.y0[i];
  }
  out.data = Dataset::create(features.x().leftCols(static_cast<Eigen::Index>(features.n_conditions())), treatment,
                             std::move(observed), features.conditions(), features.attribute_names());
  return out;
}

RecoveryRun run_recovery_once(const SyntheticSpec& spec, const RecoverySettings& settings) {
  using Clock = std::chrono::steady_clock;
  RecoveryRun run;
  run.seed = spec.seed;

  const SyntheticData synthetic = generate_synthetic(spec);
  const std::vector<double> fractions{1.0 - settings.test_fraction, settings.test_fraction};
  const auto parts = split_indices(synthetic.data.n_rows(), fractions, spec.seed);
  const Dataset train = synthetic.data.subset(parts[0]);
  const Dataset test = synthetic.data.subset(parts[1]);
  const Bitset truth = rules_coverage(synthetic.true_rules, test);
  run.true_share = static_cast<double>(truth.count()) / static_cast<double>(test.n_rows());

  const auto mining_start = Clock::now();
  MiningConfig mining = settings.mining;
  mining.screen.top_m = spec.pool_size_m;
  mining.forest.seed = spec.seed;
  const MiningResult mined = mine_candidates(train, mining);
  run.mining_seconds = std::chrono::duration<double>(Clock::now() - mining_start).count();
  run.pool_size = mined.pool.size();

  Hyperparams h = Hyperparams::for_pool(mined.pool.sizes(), 1.0, 1.0);
  h.prior_mean = settings.prior_mean;
  h.prior_variance = settings.prior_variance;
  SearchParams params = settings.search;
  params.seed = spec.seed;

  std::vector<std::size_t> last_ids;
  double last_error = recovery_error(Bitset(test.n_rows()), truth);
  const auto search_start = Clock::now();
  const SearchResult result = search(mined.pool, train, h, params, [&](std::size_t, const RuleSetModel& best) {
    if (best.rule_ids != last_ids) {
      last_ids = best.rule_ids;
      Bitset found(test.n_rows());
      for (auto id : best.rule_ids) found |= rule_coverage(mined.pool.at(id).rule, test);
      last_error = recovery_error(found, truth);
    }
    run.errors.push_back(last_error);
    run.elapsed.push_back(std::chrono::duration<double>(Clock::now() - search_start).count());
  });
  run.best = result.best;
  run.best_rule_ids = result.best.rule_ids;
  run.trace = result.trace;
  return run;
}

RecoveryReport run_recovery_experiment(const SyntheticSpec& spec, const RecoverySettings& settings,
                                       std::size_t n_repeats) {
  if (n_repeats < 1) throw ConfigError("n_repeats must be at least 1");
  spec.validate();

  RecoveryReport report;
  report.runs.resize(n_repeats);
  parallel_for(n_repeats, settings.threads, [&](std::size_t r) {
    SyntheticSpec repeat = spec;
    repeat.seed = spec.seed + r;
    report.runs[r] = run_recovery_once(repeat, settings);
  });

  const std::size_t n_iter = settings.search.n_iter;
  report.mean_error.assign(n_iter, 0.0);
  report.std_error.assign(n_iter, 0.0);
  const auto reps = static_cast<double>(n_repeats);
  for (std::size_t t = 0; t < n_iter; ++t) {
    double sum = 0.0;
    for (const auto& run : report.runs) sum += run.errors[t];
    const double mean = sum / reps;
    double ss = 0.0;
    for (const auto& run : report.runs) ss += (run.errors[t] - mean) * (run.errors[t] - mean);
    report.mean_error[t] = mean;
    report.std_error[t] = n_repeats > 1 ? std::sqrt(ss / (reps - 1.0)) : 0.0;
  }
  if (n_iter > 0) {
    report.mean_final_error = report.mean_error.back();
    report.std_final_error = report.std_error.back();
  }
  double iterations = 0.0;
  for (const auto& run : report.runs) {
    for (std::size_t t = 0; t < run.errors.size(); ++t) {
      if (run.errors[t] < 0.05) {
        iterations += static_cast<double>(t + 1);
        ++report.runs_reaching_005;
        break;
      }
    }
  }
  if (report.runs_reaching_005 > 0) report.mean_iterations_to_005 = iterations / static_cast<double>(report.runs_reaching_005);
  return report;
}

}  // namespace crs
