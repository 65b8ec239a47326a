#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "crs/bitset.hpp"
#include "crs/data.hpp"
#include "crs/errors.hpp"
#include "crs/log.hpp"

using namespace crs;

TEST_CASE("bitset set algebra and counts") {
  Bitset a(130), b(130), mask(130);
  for (std::size_t i = 0; i < 130; i += 3) a.set(i);
  for (std::size_t i = 0; i < 130; i += 5) b.set(i);
  for (std::size_t i = 60; i < 130; ++i) mask.set(i);

  CHECK(a.count() == 44);
  CHECK(Bitset::count_and(a, b) == (a & b).count());
  CHECK(Bitset::count_or_and(a, b, mask) == ((a | b) & mask).count());
  CHECK(Bitset::count_and3(a, b, mask) == (a & b & mask).count());

  const Bitset c = a.complement();
  CHECK(c.count() == 130 - 44);
  CHECK(c.size() == 130);
  CHECK((a ^ a).none());

  Bitset d = a;
  d.subtract(b);
  CHECK(d.count() == a.count() - Bitset::count_and(a, b));

  const std::vector<std::size_t> idx{1, 64, 129};
  const Bitset e = bitset_from_indices(130, idx);
  CHECK(e.indices() == idx);
}

TEST_CASE("dataset rejects non-binary conditions and labels") {
  Eigen::MatrixXd x(2, 1);
  x << 0, 0.5;
  CHECK_THROWS_AS(Dataset::create(x, {0, 1}, {0, 1}), DataError);
  x << 0, 1;
  CHECK_THROWS_AS(Dataset::create(x, {0, 2}, {0, 1}), DataError);
  CHECK_THROWS_AS(Dataset::create(x, {0}, {0, 1}), DataError);

  const Dataset ds = Dataset::create(x, {0, 1}, {1, 1});
  CHECK(ds.x().cols() == 2);
  CHECK(ds.x()(0, 1) == 1.0);
  CHECK(ds.treated_rows().count() == 1);
  CHECK(ds.positive_rows().count() == 2);
}

TEST_CASE("binarize: 3 numeric bins plus a 2-level categorical give 6 columns with intercept") {
  RawTable table;
  table.n_rows = 9;
  RawAttribute num{"age", AttributeKind::numeric, {1, 2, 3, 4, 5, 6, 7, 8, 9}, {}};
  RawAttribute cat{"sex", AttributeKind::categorical, {}, {"f", "m", "f", "m", "f", "m", "f", "m", "f"}};
  table.attributes = {num, cat};
  table.treatment = {0, 1, 0, 1, 0, 1, 0, 1, 0};
  table.outcome = {1, 1, 0, 0, 1, 1, 0, 0, 1};
  const Dataset ds = binarize(table, 3);
  CHECK(ds.x().cols() == 6);
  CHECK(ds.n_conditions() == 5);
  // Every row falls in exactly one numeric bin, including the maximum.
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(ds.x()(i, 0) + ds.x()(i, 1) + ds.x()(i, 2) == 1.0);
  }
}

TEST_CASE("binarize drops constant attributes") {
  RawTable table;
  table.n_rows = 4;
  table.attributes = {RawAttribute{"k", AttributeKind::numeric, {2, 2, 2, 2}, {}},
                      RawAttribute{"c", AttributeKind::categorical, {}, {"a", "b", "c", "a"}}};
  table.treatment = {0, 1, 0, 1};
  table.outcome = {0, 0, 1, 1};
  const LogLevel level = log_level();
  set_log_level(LogLevel::quiet);
  const Dataset ds = binarize(table, 3);
  set_log_level(level);
  // three levels: three equals plus three not-equals
  CHECK(ds.n_conditions() == 6);
}

TEST_CASE("split sizes use largest remainders and partition the rows") {
  const std::vector<double> fractions{0.6, 0.2, 0.2};
  const auto parts = split_indices(5, fractions, 7);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0].size() == 3);
  CHECK(parts[1].size() == 1);
  CHECK(parts[2].size() == 1);
  std::set<std::size_t> all;
  for (const auto& p : parts) all.insert(p.begin(), p.end());
  CHECK(all.size() == 5);
  CHECK(*all.rbegin() == 4);
  CHECK(split_indices(5, fractions, 7) == parts);

  const std::vector<double> bad{0.5, 0.6};
  CHECK_THROWS_AS(split_indices(10, bad, 0), ConfigError);
}

TEST_CASE("type-7 quantiles") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  CHECK(quantile_sorted(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile_sorted(v, 1.0 / 3.0) == doctest::Approx(2.0));
}

TEST_CASE("csv loading honours the schema") {
  const auto dir = std::filesystem::temp_directory_path() / "crs_data_test";
  std::filesystem::create_directories(dir);
  const auto csv = dir / "d.csv";
  {
    std::ofstream out(csv);
    out << "y,t,age,color\n1,0,3.5,red\n0,1,1.0,blue\n1,1,2.0,red\n";
  }
  Schema schema{"t", "y", {"age"}, {"color"}};
  const RawTable table = load_csv(csv, schema);
  CHECK(table.n_rows == 3);
  CHECK(table.treatment == std::vector<std::uint8_t>{0, 1, 1});
  CHECK(table.outcome == std::vector<std::uint8_t>{1, 0, 1});
  REQUIRE(table.attributes.size() == 2);
  CHECK(table.attributes[0].numeric[0] == 3.5);
  CHECK(table.attributes[1].categorical[1] == "blue");

  Schema unknown{"t", "y", {"height"}, {}};
  CHECK_THROWS_AS(load_csv(csv, unknown), ConfigError);
  {
    std::ofstream out(csv);
    out << "y,t,age,color\n1,0,,red\n";
  }
  CHECK_THROWS_AS(load_csv(csv, schema), DataError);
  {
    std::ofstream out(csv);
    out << "y,t,age,color\n1,3,1.0,red\n";
  }
  CHECK_THROWS_AS(load_csv(csv, schema), DataError);
  CHECK_THROWS_AS(load_csv(dir / "missing.csv", schema), DataError);
  std::filesystem::remove_all(dir);
}
