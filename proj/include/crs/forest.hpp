#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "crs/data.hpp"

namespace crs {

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t max_depth = 8;
  std::size_t min_leaf = 5;
  std::optional<std::size_t> features_per_split;  // nullopt: floor(sqrt(J))
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Random forest of Gini classification trees whose leaves store the class-1
/// frequency. Predictions average the leaf frequencies over trees.
class ProbabilityForest {
 public:
  static ProbabilityForest fit(const Dataset& ds, std::span<const std::size_t> rows,
                               const ForestConfig& config);

  double predict(const Dataset& ds, std::size_t row) const;
  std::vector<double> predict_all(const Dataset& ds) const;
  std::size_t n_trees() const { return trees_.size(); }

 private:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // left: x <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  std::vector<Tree> trees_;

  friend class TreeBuilder;
};

/// Virtual-twins labels: per-row predictions from the treated and control
/// forests and z_i = 1 iff p_treated - p_control > 0.
struct ZLabels {
  std::vector<std::uint8_t> z;
  std::vector<double> p_treated;
  std::vector<double> p_control;

  Bitset positive_rows() const;
};

ZLabels estimate_z(const Dataset& ds, const ProbabilityForest& treated, const ProbabilityForest& control);

}  // namespace crs
