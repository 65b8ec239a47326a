#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "crs/data.hpp"
#include "crs/mining.hpp"

namespace fixtures {

// Independent fair-coin conditions, treatment and outcome.
inline crs::Dataset random_dataset(std::size_t n, std::size_t j, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  Eigen::MatrixXd x(n, j);
  std::vector<std::uint8_t> t(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < j; ++c) x(i, c) = coin(rng) ? 1.0 : 0.0;
    t[i] = coin(rng);
    y[i] = coin(rng);
  }
  return crs::Dataset::create(x, t, y);
}

// Pool whose rules are the given column conjunctions, in the given order within each length.
inline crs::CandidatePool pool_of(const crs::Dataset& ds, const std::vector<std::vector<std::size_t>>& rules,
                                  std::size_t max_length) {
  std::vector<crs::PoolRule> out;
  for (const auto& cols : rules) {
    crs::PoolRule r;
    r.rule.columns = cols;
    r.coverage = crs::rule_coverage(r.rule, ds);
    out.push_back(r);
  }
  return crs::CandidatePool(out, max_length);
}

}  // namespace fixtures
