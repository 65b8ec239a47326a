#include <doctest.h>

#include <numeric>

#include "crs/errors.hpp"
#include "crs/forest.hpp"
#include "fixtures.hpp"

using namespace crs;

namespace {

std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> rows(ds.n_rows());
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

Dataset flipped(const Dataset& ds) {
  Eigen::MatrixXd x = ds.x().leftCols(ds.n_conditions());
  std::vector<std::uint8_t> y(ds.outcome());
  for (auto& v : y) v = 1 - v;
  return Dataset::create(x, ds.treatment(), y);
}

}  // namespace

TEST_CASE("a depth-1 stump predicts its leaf frequencies") {
  Eigen::MatrixXd x(6, 1);
  x << 0, 0, 0, 1, 1, 1;
  const Dataset ds = Dataset::create(x, {0, 0, 0, 0, 0, 0}, {0, 0, 1, 1, 1, 0});
  ForestConfig config;
  config.n_trees = 1;
  config.max_depth = 1;
  config.min_leaf = 1;
  config.bootstrap = false;
  const auto forest = ProbabilityForest::fit(ds, all_rows(ds), config);
  CHECK(forest.predict(ds, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(forest.predict(ds, 5) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("forest predictions are probabilities and reproducible") {
  const Dataset ds = fixtures::random_dataset(200, 8, 3);
  ForestConfig config;
  config.n_trees = 20;
  config.seed = 11;
  const auto a = ProbabilityForest::fit(ds, all_rows(ds), config).predict_all(ds);
  const auto b = ProbabilityForest::fit(ds, all_rows(ds), config).predict_all(ds);
  CHECK(a == b);
  for (double p : a) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("relabelling y as 1 - y maps predictions p to 1 - p") {
  const Dataset ds = fixtures::random_dataset(150, 6, 5);
  ForestConfig config;
  config.n_trees = 10;
  config.seed = 2;
  const auto p = ProbabilityForest::fit(ds, all_rows(ds), config).predict_all(ds);
  const Dataset other = flipped(ds);
  const auto q = ProbabilityForest::fit(other, all_rows(other), config).predict_all(other);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(q[i] == doctest::Approx(1.0 - p[i]).epsilon(1e-12));
}

TEST_CASE("virtual twins labels compare the two arm forests") {
  Eigen::MatrixXd x(8, 1);
  x << 0, 0, 0, 0, 1, 1, 1, 1;
  // treatment helps only where x = 1
  const Dataset ds = Dataset::create(x, {1, 1, 0, 0, 1, 1, 0, 0}, {0, 0, 0, 0, 1, 1, 0, 0});
  ForestConfig config;
  config.n_trees = 1;
  config.max_depth = 1;
  config.min_leaf = 1;
  config.bootstrap = false;
  const std::vector<std::size_t> treated{0, 1, 4, 5}, control{2, 3, 6, 7};
  const auto ft = ProbabilityForest::fit(ds, treated, config);
  const auto fc = ProbabilityForest::fit(ds, control, config);
  const ZLabels z = estimate_z(ds, ft, fc);
  CHECK(z.z == std::vector<std::uint8_t>{0, 0, 0, 0, 1, 1, 1, 1});
  CHECK(z.positive_rows().count() == 4);
}

TEST_CASE("forest config validation") {
  ForestConfig config;
  config.n_trees = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}
