#include <doctest.h>

#include <cmath>
#include <random>

#include "crs/logistic.hpp"
#include "crs/model.hpp"
#include "fixtures.hpp"

using namespace crs;

namespace {

Hyperparams single_length(double alpha, double beta) {
  Hyperparams h;
  h.alpha = {alpha};
  h.beta = {beta};
  return h;
}

Bitset random_cover(std::size_t n, double p, std::mt19937_64& rng) {
  Bitset b(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::bernoulli_distribution(p)(rng)) b.set(i);
  }
  return b;
}

}  // namespace

TEST_CASE("log sigmoid is stable in both tails") {
  CHECK(log_sigmoid(0.0) == doctest::Approx(std::log(0.5)));
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
  CHECK(log_sigmoid(800.0) == doctest::Approx(0.0));
  CHECK(sigmoid(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
}

TEST_CASE("rule-set prior against beta functions by factorials") {
  const Hyperparams h = single_length(1.0, 3.0);
  const std::vector<std::size_t> sizes{3};
  const std::vector<std::size_t> none{0}, one{1};
  const double p0 = log_prior(none, h, sizes);
  const double p1 = log_prior(one, h, sizes);
  CHECK(p0 == doctest::Approx(std::log(1.0 / 6.0)));
  CHECK(p1 == doctest::Approx(std::log(1.0 / 30.0)));
  CHECK(std::exp(p1 - p0) == doctest::Approx(0.2));
}

TEST_CASE("default prior decreases in M and flattens only at the last step") {
  // h(M + 1) / h(M) = (M + 1) / (2|A| - M - 1), which reaches 1 at M = |A| - 1
  for (std::size_t size = 1; size <= 50; ++size) {
    const std::vector<std::size_t> sizes{size};
    const Hyperparams h = Hyperparams::for_pool(sizes, 1.0, 1.0);
    std::vector<double> values;
    for (std::size_t m = 0; m <= size; ++m) {
      const std::vector<std::size_t> counts{m};
      values.push_back(log_prior(counts, h, sizes));
    }
    for (std::size_t m = 0; m + 1 < size; ++m) CHECK(values[m + 1] < values[m]);
    CHECK(values[size] == doctest::Approx(values[size - 1]));
    for (double v : values) CHECK(v <= values[0] + 1e-12);
  }
}

TEST_CASE("for_pool scales beta by the pool size") {
  const std::vector<std::size_t> sizes{0, 40, 7};
  const Hyperparams h = Hyperparams::for_pool(sizes, 2.0, 0.5);
  CHECK(h.alpha == std::vector<double>{2.0, 2.0, 2.0});
  CHECK(h.beta == std::vector<double>{0.5, 20.0, 3.5});
}

TEST_CASE("one-row log theta") {
  Eigen::MatrixXd x(1, 0);
  const Dataset ds = Dataset::create(x, {1}, {1});
  Bitset cover(1);
  cover.set(0);
  Weights w = Weights::zeros(1);
  w.gamma2 = 2.0;
  Hyperparams h = single_length(1.0, 1.0);
  CHECK(log_theta(cover, w, ds, h) == doctest::Approx(-2.1269280110429727).epsilon(1e-12));
}

TEST_CASE("intercept-only fit solves 1 - sigmoid(v0) = v0") {
  Eigen::MatrixXd x(1, 0);
  const Dataset ds = Dataset::create(x, {0}, {1});
  const WeightFit fit = fit_weights(Bitset(1), ds, single_length(1.0, 1.0));
  CHECK(fit.converged);
  CHECK(fit.weights.v[0] == doctest::Approx(0.4010581375415468).epsilon(1e-6));
}

TEST_CASE("log theta gradient matches central differences") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 0.7);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Dataset ds = fixtures::random_dataset(80, 4, seed);
    const Bitset cover = random_cover(ds.n_rows(), 0.3, rng);
    Hyperparams h = single_length(1.0, 1.0);
    h.prior_variance = {2.0};
    h.prior_mean = {0.1};
    for (int point = 0; point < 5; ++point) {
      Eigen::VectorXd packed(ds.n_conditions() + 4);
      for (Eigen::Index k = 0; k < packed.size(); ++k) packed[k] = normal(rng);
      const Weights w = Weights::unpack(packed);
      const Eigen::VectorXd g = log_theta_gradient(cover, w, ds, h);
      for (Eigen::Index k = 0; k < packed.size(); ++k) {
        const double step = 1e-5;
        Eigen::VectorXd up = packed, down = packed;
        up[k] += step;
        down[k] -= step;
        const double fd = (log_theta(cover, Weights::unpack(up), ds, h) -
                           log_theta(cover, Weights::unpack(down), ds, h)) / (2 * step);
        CHECK(g[k] == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
      }
    }
  }
}

TEST_CASE("weight fit converges to a stationary point") {
  std::mt19937_64 rng(8);
  const Dataset ds = fixtures::random_dataset(200, 6, 12);
  const Bitset cover = random_cover(ds.n_rows(), 0.4, rng);
  const Hyperparams h = single_length(1.0, 1.0);
  const WeightFit fit = fit_weights(cover, ds, h);
  CHECK(fit.converged);
  CHECK(fit.grad_norm < 1e-6);
  CHECK(log_theta_gradient(cover, fit.weights, ds, h).norm() < 1e-6);
  CHECK(fit.log_theta == doctest::Approx(log_theta(cover, fit.weights, ds, h)));
}

TEST_CASE("no rule set with the sign conditions beats the ideal set") {
  const Dataset ds = fixtures::random_dataset(150, 5, 3);
  const Hyperparams h = single_length(1.0, 1.0);
  const double ideal = ideal_theta(ds, h);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 60; ++k) {
    const Bitset cover = random_cover(ds.n_rows(), 0.1 + 0.8 * std::uniform_real_distribution<double>()(rng), rng);
    const WeightFit fit = fit_weights(cover, ds, h);
    if (fit.weights.sign_conditions()) CHECK(fit.log_theta <= ideal + 1e-6);
  }
  CHECK(ideal_coverage(ds) == (ds.treated_rows() ^ ds.positive_rows()).complement());
}

TEST_CASE("fit_rule_set combines likelihood and prior") {
  const Dataset ds = fixtures::random_dataset(120, 4, 6);
  const CandidatePool pool = fixtures::pool_of(ds, {{0}, {1}, {0, 2}}, 2);
  const Hyperparams h = Hyperparams::for_pool(pool.sizes(), 1.0, 1.0);
  const std::vector<std::size_t> ids{0, 2};
  const RuleSetModel m = fit_rule_set(ids, ds, h, pool);
  CHECK(m.per_length == std::vector<std::size_t>{1, 1});
  CHECK(m.coverage == (pool.coverage(0) | pool.coverage(2)));
  CHECK(m.log_f == doctest::Approx(m.log_theta + m.log_prior));
  CHECK(m.log_f == doctest::Approx(objective_f(ids, m.weights, ds, h, pool)));
}
