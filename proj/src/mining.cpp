#include "crs/mining.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "crs/errors.hpp"
#include "crs/log.hpp"

namespace crs {
namespace {

struct WeightedTransaction {
  std::vector<std::size_t> items;
  std::size_t count;
};

// Prefix tree of frequency-ordered transactions with per-item node chains.
class FpTree {
 public:
  FpTree(const std::vector<WeightedTransaction>& transactions, std::size_t min_count) {
    std::map<std::size_t, std::size_t> counts;
    for (const auto& t : transactions) {
      for (auto item : t.items) counts[item] += t.count;
    }
    for (const auto& [item, count] : counts) {
      if (count >= min_count) frequent_.push_back({item, count});
    }
    // Most frequent first; ties by item id for a deterministic layout.
    std::sort(frequent_.begin(), frequent_.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    for (std::size_t r = 0; r < frequent_.size(); ++r) rank_[frequent_[r].first] = r;
    heads_.assign(frequent_.size(), -1);

    nodes_.push_back({0, 0, -1, -1, {}});
    std::vector<std::size_t> ranked;
    for (const auto& t : transactions) {
      ranked.clear();
      for (auto item : t.items) {
        auto it = rank_.find(item);
        if (it != rank_.end()) ranked.push_back(it->second);
      }
      std::sort(ranked.begin(), ranked.end());
      insert(ranked, t.count);
    }
  }

  // Items in ascending frequency order, with their total counts.
  std::vector<std::pair<std::size_t, std::size_t>> items_ascending() const {
    return {frequent_.rbegin(), frequent_.rend()};
  }

  std::vector<WeightedTransaction> conditional_base(std::size_t item) const {
    std::vector<WeightedTransaction> base;
    for (int node = heads_[rank_.at(item)]; node >= 0; node = nodes_[static_cast<std::size_t>(node)].next) {
      WeightedTransaction path{{}, nodes_[static_cast<std::size_t>(node)].count};
      for (int p = nodes_[static_cast<std::size_t>(node)].parent; p > 0; p = nodes_[static_cast<std::size_t>(p)].parent) {
        path.items.push_back(frequent_[nodes_[static_cast<std::size_t>(p)].rank].first);
      }
      if (!path.items.empty()) base.push_back(std::move(path));
    }
    return base;
  }

 private:
  struct Node {
    std::size_t rank;
    std::size_t count;
    int parent;
    int next;  // next node holding the same item
    std::vector<int> children;
  };

  void insert(const std::vector<std::size_t>& ranked, std::size_t count) {
    int current = 0;
    for (auto r : ranked) {
      int child = -1;
      for (int c : nodes_[static_cast<std::size_t>(current)].children) {
        if (nodes_[static_cast<std::size_t>(c)].rank == r) {
          child = c;
          break;
        }
      }
      if (child < 0) {
        child = static_cast<int>(nodes_.size());
        nodes_.push_back({r, 0, current, heads_[r], {}});
        heads_[r] = child;
        nodes_[static_cast<std::size_t>(current)].children.push_back(child);
      }
      nodes_[static_cast<std::size_t>(child)].count += count;
      current = child;
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> frequent_;  // (item, count)
  std::map<std::size_t, std::size_t> rank_;
  std::vector<int> heads_;
  std::vector<Node> nodes_;
};

void mine(const FpTree& tree, std::vector<std::size_t>& suffix, std::size_t min_count, std::size_t max_len,
          std::vector<Itemset>& out) {
  for (const auto& [item, count] : tree.items_ascending()) {
    suffix.push_back(item);
    Itemset found{suffix, count};
    std::sort(found.items.begin(), found.items.end());
    out.push_back(std::move(found));
    if (suffix.size() < max_len) {
      const auto base = tree.conditional_base(item);
      if (!base.empty()) {
        const FpTree conditional(base, min_count);
        mine(conditional, suffix, min_count, max_len, out);
      }
    }
    suffix.pop_back();
  }
}

}  // namespace

std::vector<Itemset> fp_growth(std::span<const Transaction> transactions, double min_support,
                               std::size_t max_len) {
  if (transactions.empty()) throw DataError("empty transaction set");
  if (!(min_support > 0.0 && min_support <= 1.0)) throw ConfigError("min_support must be in (0, 1]");
  if (max_len < 1) throw ConfigError("max rule length must be at least 1");

  const auto n = static_cast<double>(transactions.size());
  const auto min_count = static_cast<std::size_t>(std::max(1.0, std::ceil(min_support * n - 1e-9)));

  std::vector<WeightedTransaction> weighted;
  weighted.reserve(transactions.size());
  for (const auto& t : transactions) {
    std::vector<std::size_t> items = t;
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    weighted.push_back({std::move(items), 1});
  }
  const FpTree tree(weighted, min_count);
  std::vector<Itemset> out;
  std::vector<std::size_t> suffix;
  mine(tree, suffix, min_count, max_len, out);
  std::sort(out.begin(), out.end(), [](const Itemset& a, const Itemset& b) {
    return a.items.size() != b.items.size() ? a.items.size() < b.items.size() : a.items < b.items;
  });
  return out;
}

std::vector<Transaction> transactions_from(const Dataset& ds, std::span<const std::size_t> rows) {
  std::vector<Transaction> out;
  out.reserve(rows.size());
  for (auto r : rows) {
    Transaction t;
    for (std::size_t c = 0; c < ds.n_conditions(); ++c) {
      if (ds.column_bits(c).test(r)) t.push_back(c);
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> Rule::condition_strings(const Dataset& ds) const {
  std::vector<std::string> out;
  for (auto c : columns) out.push_back(ds.describe_column(c));
  return out;
}

std::string Rule::describe(const Dataset& ds) const {
  std::string out;
  for (auto c : columns) {
    if (!out.empty()) out += " AND ";
    out += ds.describe_column(c);
  }
  return out;
}

Bitset rule_coverage(const Rule& rule, const Dataset& ds) {
  Bitset out(ds.n_rows());
  out.fill();
  for (auto c : rule.columns) {
    if (c >= ds.n_conditions()) throw std::out_of_range("rule references an unknown condition column");
    out &= ds.column_bits(c);
  }
  return out;
}

CandidatePool::CandidatePool(std::vector<PoolRule> rules, std::size_t max_length)
    : rules_(std::move(rules)), sizes_(max_length, 0), max_length_(max_length) {
  std::stable_sort(rules_.begin(), rules_.end(),
                   [](const PoolRule& a, const PoolRule& b) { return a.rule.length() < b.rule.length(); });
  std::set<Rule> seen;
  for (const auto& r : rules_) {
    if (r.rule.length() < 1 || r.rule.length() > max_length) {
      throw std::invalid_argument("rule length outside 1..max_length");
    }
    if (!seen.insert(r.rule).second) throw std::invalid_argument("duplicate rule in pool");
    ++sizes_[r.rule.length() - 1];
  }
}

std::vector<std::size_t> CandidatePool::ids_of_length(std::size_t length) const {
  std::vector<std::size_t> ids;
  for (std::size_t k = 0; k < rules_.size(); ++k) {
    if (rules_[k].rule.length() == length) ids.push_back(k);
  }
  return ids;
}

CandidatePool build_pool(std::span<const Itemset> itemsets, const Dataset& ds, const ZLabels& zl,
                         const ScreenConfig& screen) {
  if (screen.top_m < 1) throw ConfigError("top_m must be at least 1");
  const Bitset z_rows = zl.positive_rows();
  if (z_rows.size() != ds.n_rows()) throw DataError("z labels do not match the dataset");

  std::set<Rule> unique;
  for (const auto& itemset : itemsets) {
    Rule rule{itemset.items};
    std::sort(rule.columns.begin(), rule.columns.end());
    rule.columns.erase(std::unique(rule.columns.begin(), rule.columns.end()), rule.columns.end());
    if (rule.length() < 1 || rule.length() > screen.max_length) continue;
    if (rule.columns.back() >= ds.n_conditions()) continue;  // intercept or out of range
    unique.insert(std::move(rule));
  }

  std::vector<PoolRule> survivors;
  for (const auto& rule : unique) {
    PoolRule candidate;
    candidate.rule = rule;
    candidate.coverage = rule_coverage(rule, ds);
    const ValidityResult validity = validity_check(candidate.coverage, ds, screen.validity);
    if (!validity.pass) continue;
    candidate.validity_p = validity.min_p;
    try {
      candidate.ate = matched_ate(candidate.coverage, ds, screen.propensity_l2);
    } catch (const DataError&) {
      continue;
    }
    candidate.support = Bitset::count_and(candidate.coverage, z_rows);
    survivors.push_back(std::move(candidate));
  }
  if (survivors.empty()) throw EmptyPoolError();

  std::sort(survivors.begin(), survivors.end(), [](const PoolRule& a, const PoolRule& b) {
    if (a.ate != b.ate) return a.ate > b.ate;
    const auto ca = a.coverage.count();
    const auto cb = b.coverage.count();
    if (ca != cb) return ca > cb;
    return a.rule < b.rule;
  });
  if (survivors.size() < screen.top_m) {
    log_warning("top_m = " + std::to_string(screen.top_m) + " exceeds the " + std::to_string(survivors.size()) +
                " rules that survived screening; keeping all");
  } else {
    survivors.resize(screen.top_m);
  }
  return CandidatePool(std::move(survivors), screen.max_length);
}

MiningResult mine_candidates(const Dataset& train, const MiningConfig& config) {
  std::vector<std::size_t> treated;
  std::vector<std::size_t> control;
  for (std::size_t i = 0; i < train.n_rows(); ++i) (train.treatment()[i] ? treated : control).push_back(i);
  if (treated.empty() || control.empty()) throw DataError("training data needs both treated and control rows");

  ForestConfig control_config = config.forest;
  control_config.seed = config.forest.seed + 1;
  const auto treated_forest = ProbabilityForest::fit(train, treated, config.forest);
  const auto control_forest = ProbabilityForest::fit(train, control, control_config);

  MiningResult result;
  result.z = estimate_z(train, treated_forest, control_forest);
  const std::vector<std::size_t> z_rows = result.z.positive_rows().indices();
  if (z_rows.empty()) throw EmptyPoolError("no rows with a positive estimated treatment effect");

  const auto transactions = transactions_from(train, z_rows);
  const auto itemsets = fp_growth(transactions, config.min_support, config.screen.max_length);
  result.n_itemsets = itemsets.size();
  if (itemsets.empty()) throw EmptyPoolError();
  result.pool = build_pool(itemsets, train, result.z, config.screen);
  return result;
}

nlohmann::json pool_to_json(const CandidatePool& pool, const Dataset& ds) {
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pool.at(a).ate > pool.at(b).ate; });

  nlohmann::json rules = nlohmann::json::array();
  for (auto id : order) {
    const PoolRule& r = pool.at(id);
    rules.push_back({{"id", id},
                     {"conditions", r.rule.condition_strings(ds)},
                     {"columns", r.rule.columns},
                     {"length", r.rule.length()},
                     {"support_z", r.support},
                     {"coverage", r.coverage.count()},
                     {"coverage_fraction", static_cast<double>(r.coverage.count()) / static_cast<double>(ds.n_rows())},
                     {"validity_min_p", r.validity_p},
                     {"ate", r.ate}});
  }
  return {{"n_rules", pool.size()}, {"sizes_by_length", pool.sizes()}, {"rules", rules}};
}

}  // namespace crs
