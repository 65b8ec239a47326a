#include <doctest.h>

#include <cmath>
#include <random>

#include "crs/errors.hpp"
#include "crs/screening.hpp"
#include "fixtures.hpp"

using namespace crs;

namespace {

Bitset all_of(const Dataset& ds) {
  Bitset b(ds.n_rows());
  b.fill();
  return b;
}

// Randomized treatment with balanced covariates; y(1) flips y(0) from 0 to 1 on
// a `lift` share of rows.
Dataset randomized(std::size_t n, double lift, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5), flip(lift);
  Eigen::MatrixXd x(n, 4);
  std::vector<std::uint8_t> t(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 4; ++c) x(i, c) = coin(rng);
    const bool y0 = std::bernoulli_distribution(0.2 + 0.4 * x(i, 0))(rng);
    const bool y1 = y0 || flip(rng);
    t[i] = coin(rng);
    y[i] = t[i] ? y1 : y0;
  }
  return Dataset::create(x, t, y);
}

}  // namespace

TEST_CASE("welch t-test against the textbook formula") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
  const auto r = welch_ttest(a, b);
  CHECK(r.conclusive);
  CHECK(r.t == doctest::Approx(-1.0));
  CHECK(r.df == doctest::Approx(8.0));
  CHECK(r.p == doctest::Approx(0.34659350708733416).epsilon(1e-10));

  const auto s = welch_ttest(b, a);
  CHECK(s.t == doctest::Approx(1.0));
  CHECK(s.p == doctest::Approx(r.p));
}

TEST_CASE("welch t-test edge cases") {
  const std::vector<double> a{1, 2, 3};
  const auto same = welch_ttest(a, a);
  CHECK(same.t == 0.0);
  CHECK(same.p == doctest::Approx(1.0));

  const std::vector<double> lo{0, 1e-9, 0, 1e-9}, hi{1, 1 + 1e-9, 1, 1 + 1e-9};
  CHECK(welch_ttest(lo, hi).p < 1e-6);

  const std::vector<double> one{1.0};
  CHECK_FALSE(welch_ttest(one, a).conclusive);
}

TEST_CASE("validity check") {
  const Dataset ds = fixtures::random_dataset(400, 5, 1);
  CHECK(validity_check(all_of(ds), ds).pass);

  // a covariate equal to T is maximally imbalanced
  Eigen::MatrixXd x = ds.x().leftCols(ds.n_conditions());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) x(i, 2) = ds.treatment()[i];
  const Dataset leaky = Dataset::create(x, ds.treatment(), ds.outcome());
  CHECK_FALSE(validity_check(all_of(leaky), leaky).pass);

  Bitset one_treated(ds.n_rows());
  bool seen_treated = false;
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    if (ds.treatment()[i] && !seen_treated) {
      one_treated.set(i);
      seen_treated = true;
    } else if (!ds.treatment()[i]) {
      one_treated.set(i);
    }
  }
  CHECK_FALSE(validity_check(one_treated, ds).pass);
}

TEST_CASE("matched ATE is 1 when y equals T") {
  const Dataset base = fixtures::random_dataset(300, 4, 2);
  const Dataset ds = Dataset::create(base.x().leftCols(4), base.treatment(), base.treatment());
  CHECK(matched_ate(all_of(ds), ds) == doctest::Approx(1.0));
}

TEST_CASE("matched ATE is near 0 without an effect") {
  const Dataset ds = randomized(2000, 0.0, 3);
  CHECK(std::abs(matched_ate(all_of(ds), ds)) < 0.05);
}

TEST_CASE("matched ATE recovers a planted lift") {
  // y(0) = 0 on about 60% of rows and 1/3 of those flip, so the effect is 0.2
  std::mt19937_64 rng(9);
  std::bernoulli_distribution coin(0.5);
  const std::size_t n = 2000;
  Eigen::MatrixXd x(n, 3);
  std::vector<std::uint8_t> t(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) x(i, c) = coin(rng);
    const bool y0 = std::bernoulli_distribution(0.4)(rng);
    const bool y1 = y0 || std::bernoulli_distribution(1.0 / 3.0)(rng);
    t[i] = coin(rng);
    y[i] = t[i] ? y1 : y0;
  }
  const Dataset ds = Dataset::create(x, t, y);
  CHECK(matched_ate(all_of(ds), ds) == doctest::Approx(0.2).epsilon(0.25));
}

TEST_CASE("matched ATE needs both arms") {
  const Dataset ds = fixtures::random_dataset(50, 3, 4);
  CHECK_THROWS_AS(matched_ate(ds.treated_rows(), ds), DataError);
}
