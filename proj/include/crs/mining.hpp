#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crs/bitset.hpp"
#include "crs/data.hpp"
#include "crs/forest.hpp"
#include "crs/screening.hpp"

namespace crs {

using Transaction = std::vector<std::size_t>;

struct Itemset {
  std::vector<std::size_t> items;  // ascending
  std::size_t support = 0;         // number of transactions containing all items

  bool operator==(const Itemset&) const = default;
};

/// All itemsets of at most max_len items whose support is at least
/// ceil(min_support * |transactions|). Output is sorted by (size, items).
std::vector<Itemset> fp_growth(std::span<const Transaction> transactions, double min_support,
                               std::size_t max_len);

/// Rows of ds (restricted to `rows`) as transactions of their set condition columns.
std::vector<Transaction> transactions_from(const Dataset& ds, std::span<const std::size_t> rows);

/// Conjunction of condition columns.
struct Rule {
  std::vector<std::size_t> columns;  // strictly increasing, never the intercept

  std::size_t length() const { return columns.size(); }
  std::string describe(const Dataset& ds) const;
  std::vector<std::string> condition_strings(const Dataset& ds) const;
  auto operator<=>(const Rule&) const = default;
};

Bitset rule_coverage(const Rule& rule, const Dataset& ds);

struct PoolRule {
  Rule rule;
  Bitset coverage;            // over all training rows
  std::size_t support = 0;    // rows with z = 1 covered by the rule
  double ate = 0.0;           // propensity-matched effect on the covered rows
  double validity_p = 1.0;    // smallest per-covariate balance p value
};

/// Screened candidate rules, ordered by length then by screening rank.
/// A rule's id is its position in this order.
class CandidatePool {
 public:
  CandidatePool() = default;
  CandidatePool(std::vector<PoolRule> rules, std::size_t max_length);

  std::size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }
  std::size_t max_length() const { return max_length_; }
  std::size_t n_rows() const { return rules_.empty() ? 0 : rules_.front().coverage.size(); }
  const PoolRule& at(std::size_t id) const { return rules_.at(id); }
  const Bitset& coverage(std::size_t id) const { return rules_[id].coverage; }
  std::size_t length_of(std::size_t id) const { return rules_[id].rule.length(); }
  const std::vector<PoolRule>& rules() const { return rules_; }
  /// |A_l| for l = 1..max_length (index l-1).
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::vector<std::size_t> ids_of_length(std::size_t length) const;

 private:
  std::vector<PoolRule> rules_;
  std::vector<std::size_t> sizes_;
  std::size_t max_length_ = 0;
};

struct ScreenConfig {
  ValidityOptions validity;
  std::size_t top_m = 5000;
  std::size_t max_length = 3;
  double propensity_l2 = kPropensityL2;
};

/// Deduplicates itemsets into rules, drops rules failing the balance check,
/// ranks survivors by matched ATE (ties: larger coverage, then rule columns) and
/// keeps the best top_m. Throws EmptyPoolError when nothing survives.
CandidatePool build_pool(std::span<const Itemset> itemsets, const Dataset& ds, const ZLabels& zl,
                         const ScreenConfig& screen);

struct MiningConfig {
  ForestConfig forest;
  double min_support = 0.05;
  ScreenConfig screen;
};

struct MiningResult {
  ZLabels z;
  std::size_t n_itemsets = 0;
  CandidatePool pool;
};

/// Virtual twins on the training rows, FP-Growth over the z = 1 rows, then screening.
MiningResult mine_candidates(const Dataset& train, const MiningConfig& config);

/// Audit view of the pool, rules sorted by screened ATE descending.
nlohmann::json pool_to_json(const CandidatePool& pool, const Dataset& ds);

}  // namespace crs
