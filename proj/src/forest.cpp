#include "crs/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "crs/errors.hpp"

namespace crs {

void ForestConfig::validate() const {
  if (n_trees < 1) throw ConfigError("forest needs at least one tree");
  if (max_depth < 1) throw ConfigError("forest max_depth must be at least 1");
  if (min_leaf < 1) throw ConfigError("forest min_leaf must be at least 1");
  if (features_per_split && *features_per_split < 1) throw ConfigError("features_per_split must be at least 1");
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& ds, const ForestConfig& config, std::size_t mtry, std::mt19937_64& rng)
      : ds_(ds), config_(config), mtry_(mtry), rng_(rng), features_(ds.n_conditions()) {
    std::iota(features_.begin(), features_.end(), std::size_t{0});
  }

  ProbabilityForest::Tree build(std::vector<std::size_t> samples) {
    tree_.clear();
    grow(samples, 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double impurity = 0.0;
  };

  // Weighted Gini impurity up to a constant factor: pos * neg / n.
  static double impurity(double pos, double n) { return n > 0.0 ? pos * (n - pos) / n : 0.0; }

  std::int32_t grow(const std::vector<std::size_t>& samples, std::size_t depth) {
    const auto index = static_cast<std::int32_t>(tree_.size());
    tree_.emplace_back();
    double pos = 0.0;
    for (auto i : samples) pos += ds_.outcome()[i];
    const double n = static_cast<double>(samples.size());
    tree_[static_cast<std::size_t>(index)].value = pos / n;

    if (depth >= config_.max_depth || samples.size() < 2 * config_.min_leaf || pos == 0.0 || pos == n) {
      return index;
    }
    const Split best = find_split(samples, pos);
    if (best.feature < 0) return index;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    const auto col = static_cast<Eigen::Index>(best.feature);
    for (auto i : samples) {
      (ds_.x()(static_cast<Eigen::Index>(i), col) <= best.threshold ? left : right).push_back(i);
    }
    const std::int32_t l = grow(left, depth + 1);
    const std::int32_t r = grow(right, depth + 1);
    auto& node = tree_[static_cast<std::size_t>(index)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return index;
  }

  Split find_split(const std::vector<std::size_t>& samples, double pos) {
    const double n = static_cast<double>(samples.size());
    Split best;
    best.impurity = impurity(pos, n) - 1e-12;

    // Partial Fisher-Yates draw of mtry candidate features.
    const std::size_t mtry = std::min(mtry_, features_.size());
    for (std::size_t k = 0; k < mtry; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, features_.size() - 1);
      std::swap(features_[k], features_[pick(rng_)]);
    }

    std::vector<std::pair<double, std::uint8_t>> values(samples.size());
    for (std::size_t k = 0; k < mtry; ++k) {
      const std::size_t feature = features_[k];
      const auto col = static_cast<Eigen::Index>(feature);
      for (std::size_t s = 0; s < samples.size(); ++s) {
        values[s] = {ds_.x()(static_cast<Eigen::Index>(samples[s]), col), ds_.outcome()[samples[s]]};
      }
      std::sort(values.begin(), values.end());
      double left_n = 0.0;
      double left_pos = 0.0;
      for (std::size_t s = 0; s + 1 < values.size(); ++s) {
        left_n += 1.0;
        left_pos += values[s].second;
        if (values[s].first == values[s + 1].first) continue;
        if (left_n < static_cast<double>(config_.min_leaf) ||
            n - left_n < static_cast<double>(config_.min_leaf)) {
          continue;
        }
        const double score = impurity(left_pos, left_n) + impurity(pos - left_pos, n - left_n);
        if (score < best.impurity) {
          best.impurity = score;
          best.feature = static_cast<std::int32_t>(feature);
          best.threshold = 0.5 * (values[s].first + values[s + 1].first);
        }
      }
    }
    return best;
  }

  const Dataset& ds_;
  const ForestConfig& config_;
  std::size_t mtry_;
  std::mt19937_64& rng_;
  std::vector<std::size_t> features_;
  ProbabilityForest::Tree tree_;
};

ProbabilityForest ProbabilityForest::fit(const Dataset& ds, std::span<const std::size_t> rows,
                                         const ForestConfig& config) {
  config.validate();
  if (rows.empty()) throw DataError("cannot fit a forest on an empty row set");
  const std::size_t j = ds.n_conditions();
  const std::size_t mtry = config.features_per_split.value_or(
      std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(j))))));

  ProbabilityForest forest;
  forest.trees_.reserve(config.n_trees);
  for (std::size_t t = 0; t < config.n_trees; ++t) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(t)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> samples;
    if (config.bootstrap) {
      std::uniform_int_distribution<std::size_t> draw(0, rows.size() - 1);
      samples.resize(rows.size());
      for (auto& s : samples) s = rows[draw(rng)];
    } else {
      samples.assign(rows.begin(), rows.end());
    }
    TreeBuilder builder(ds, config, mtry, rng);
    forest.trees_.push_back(builder.build(std::move(samples)));
  }
  return forest;
}

double ProbabilityForest::predict(const Dataset& ds, std::size_t row) const {
  const auto r = static_cast<Eigen::Index>(row);
  double total = 0.0;
  for (const auto& tree : trees_) {
    std::size_t node = 0;
    while (tree[node].feature >= 0) {
      const double value = ds.x()(r, static_cast<Eigen::Index>(tree[node].feature));
      node = static_cast<std::size_t>(value <= tree[node].threshold ? tree[node].left : tree[node].right);
    }
    total += tree[node].value;
  }
  return total / static_cast<double>(trees_.size());
}

std::vector<double> ProbabilityForest::predict_all(const Dataset& ds) const {
  std::vector<double> out(ds.n_rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = predict(ds, i);
  return out;
}

Bitset ZLabels::positive_rows() const {
  Bitset out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i]) out.set(i);
  }
  return out;
}

ZLabels estimate_z(const Dataset& ds, const ProbabilityForest& treated, const ProbabilityForest& control) {
  ZLabels labels;
  labels.p_treated = treated.predict_all(ds);
  labels.p_control = control.predict_all(ds);
  labels.z.resize(ds.n_rows());
  for (std::size_t i = 0; i < labels.z.size(); ++i) {
    labels.z[i] = labels.p_treated[i] - labels.p_control[i] > 0.0 ? 1 : 0;
  }
  return labels;
}

}  // namespace crs
