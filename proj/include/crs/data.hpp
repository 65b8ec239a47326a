#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crs/bitset.hpp"

namespace crs {

/// Role assignment for the columns of an input CSV.
struct Schema {
  std::string treatment;
  std::string outcome;
  std::vector<std::string> numeric;
  std::vector<std::string> categorical;

  static Schema from_json_file(const std::filesystem::path& path);
};

enum class AttributeKind { numeric, categorical };

struct RawAttribute {
  std::string name;
  AttributeKind kind = AttributeKind::numeric;
  std::vector<double> numeric;           // populated for numeric attributes
  std::vector<std::string> categorical;  // populated for categorical attributes
};

/// Parsed table with roles attached. Row order matches the file.
struct RawTable {
  std::vector<std::string> column_names;  // header, as read
  std::vector<RawAttribute> attributes;   // schema order: numeric then categorical
  std::vector<std::uint8_t> treatment;
  std::vector<std::uint8_t> outcome;
  std::size_t n_rows = 0;
};

RawTable load_csv(const std::filesystem::path& path, const Schema& schema);

enum class ConditionKind { equals, not_equals, interval };

/// One binary condition column. Intervals are [lower, upper) except when
/// upper_closed is set (the last interval of an attribute).
struct Condition {
  std::size_t attribute = 0;
  ConditionKind kind = ConditionKind::equals;
  std::string category;
  double lower = 0.0;
  double upper = 0.0;
  bool upper_closed = false;

  bool matches(double value) const;
  bool matches(const std::string& value) const;
  std::string describe(const std::string& attribute_name) const;
};

/// Binary design matrix with a trailing intercept column, plus treatment and
/// outcome. Immutable once built.
class Dataset {
 public:
  Dataset() = default;

  /// Builds from binary condition columns (n x J, no intercept). Throws DataError
  /// on non-binary entries or mismatched lengths.
  static Dataset create(const Eigen::MatrixXd& conditions, std::vector<std::uint8_t> treatment,
                        std::vector<std::uint8_t> outcome, std::vector<Condition> dictionary = {},
                        std::vector<std::string> attribute_names = {});

  std::size_t n_rows() const { return treatment_.size(); }
  /// Number of condition columns J (excludes the intercept).
  std::size_t n_conditions() const { return column_bits_.size(); }
  std::size_t intercept_column() const { return n_conditions(); }

  /// n x (J+1); last column is all ones.
  const Eigen::MatrixXd& x() const { return x_; }
  const std::vector<std::uint8_t>& treatment() const { return treatment_; }
  const std::vector<std::uint8_t>& outcome() const { return outcome_; }
  const Bitset& treated_rows() const { return treated_; }
  const Bitset& positive_rows() const { return positive_; }
  const Bitset& column_bits(std::size_t column) const { return column_bits_[column]; }
  const std::vector<Condition>& conditions() const { return conditions_; }
  const std::vector<std::string>& attribute_names() const { return attribute_names_; }

  std::string describe_column(std::size_t column) const;
  Dataset subset(std::span<const std::size_t> rows) const;

 private:
  Eigen::MatrixXd x_;
  std::vector<std::uint8_t> treatment_;
  std::vector<std::uint8_t> outcome_;
  Bitset treated_;
  Bitset positive_;
  std::vector<Bitset> column_bits_;
  std::vector<Condition> conditions_;
  std::vector<std::string> attribute_names_;
};

/// Turns each attribute into binary condition columns: categorical levels give
/// equals (and, above two levels, not-equals) conditions; numeric attributes give
/// bins_per_numeric quantile intervals. Constant columns are dropped.
Dataset binarize(const RawTable& table, std::size_t bins_per_numeric);

/// Seeded shuffle into parts of the given fractions (largest-remainder rounding).
/// Returns the row indices of each part.
std::vector<std::vector<std::size_t>> split_indices(std::size_t n, std::span<const double> fractions,
                                                    std::uint64_t seed);

std::vector<Dataset> split(const Dataset& ds, std::span<const double> fractions, std::uint64_t seed);

/// Type-7 (linear interpolation) empirical quantile of sorted values.
double quantile_sorted(std::span<const double> sorted, double p);

}  // namespace crs
