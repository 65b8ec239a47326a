#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/forest.hpp"
#include "crs/mining.hpp"
#include "crs/model.hpp"
#include "crs/search.hpp"
#include "crs/synth.hpp"

namespace crs {

/// Everything a command needs. Keys in the config file are the field names.
struct RunConfig {
  std::string data;
  std::string schema;
  std::string out = "out";
  std::uint64_t seed = 0;
  bool force = false;
  std::size_t threads = 1;

  std::size_t bins = 3;
  std::vector<double> split = {0.6, 0.2, 0.2};  // train, validation, test

  std::size_t n_trees = 100;
  std::size_t max_depth = 8;
  std::size_t min_leaf = 5;
  std::optional<std::size_t> features_per_split;
  bool bootstrap = true;

  double min_support = 0.05;
  std::size_t max_rule_length = 3;
  double validity_alpha = 0.05;
  std::string validity_correction = "bonferroni";
  std::size_t top_m = 5000;
  double propensity_l2 = kPropensityL2;

  double alpha = 1.0;
  double beta_scale = 1.0;
  double prior_mean = 0.0;
  double prior_variance = 1.0;

  std::size_t n_iter = 150;
  double t0 = 1.0;
  double q_explore = 0.1;
  std::string neighbor_score = "gain";
  std::optional<double> bound_c;

  std::vector<double> sweep_alpha = {1.0};
  std::vector<double> sweep_beta_scale = {0.01, 0.1, 1.0, 10.0, 100.0};

  std::size_t synth_n = 2000;
  std::size_t synth_j = 50;
  std::size_t synth_true_rules = 5;
  std::size_t synth_repeats = 20;
  double synth_test_fraction = 0.3;

  void validate() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  std::string to_toml() const;
  static RunConfig from_toml(const std::string& text);

  /// Reads TOML, or JSON when the extension is .json.
  static RunConfig load(const std::filesystem::path& path);

  ForestConfig forest() const;
  MiningConfig mining() const;
  SearchParams search() const;
  Hyperparams hyperparams(std::span<const std::size_t> pool_sizes) const;
  Hyperparams hyperparams(std::span<const std::size_t> pool_sizes, double alpha_value, double beta_value) const;
  SyntheticSpec synthetic() const;
  RecoverySettings recovery() const;
};

/// Flat TOML subset: `key = value` lines with strings, integers, floats,
/// booleans and one-line arrays of numbers. Comments start with '#'.
nlohmann::json parse_flat_toml(const std::string& text);
std::string write_flat_toml(const nlohmann::json& table);

}  // namespace crs
