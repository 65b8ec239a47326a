#include "crs/search.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>

#include "crs/errors.hpp"
#include "crs/log.hpp"

namespace crs {

OutcomePartition partition_outcomes(const Dataset& ds) {
  OutcomePartition part;
  const Bitset& treated = ds.treated_rows();
  const Bitset& positive = ds.positive_rows();
  part.e0 = positive;
  part.e0.subtract(treated);
  part.e1 = treated;
  part.e1.subtract(positive);
  part.u = (treated ^ positive).complement();
  part.treated = treated;
  part.treated_positive = treated & positive;
  return part;
}

double precision_q(const Bitset& coverage, const OutcomePartition& part) {
  const std::size_t total = part.u.count();
  if (total == 0) {
    log_warning("precision is undefined when no row has T == y; using 0");
    return 0.0;
  }
  return static_cast<double>(Bitset::count_and(coverage, part.u)) / static_cast<double>(total);
}

Mispartition mispartition(const Bitset& coverage, const OutcomePartition& part) {
  Mispartition out;
  out.eps = (part.e0 | part.e1) & coverage;
  out.u = part.u;
  out.u.subtract(coverage);
  return out;
}

std::string_view to_string(Action action) {
  switch (action) {
    case Action::none:
      return "none";
    case Action::add:
      return "add";
    case Action::cut:
      return "cut";
    case Action::replace:
      return "replace";
  }
  return "none";
}

double BoundTracker::sum() const {
  double total = 0.0;
  for (double v : m) total += v;
  return total;
}

BoundTracker init_bound(double theta_ideal, double theta_empty, double log_p_empty, const Hyperparams& h,
                        std::span<const std::size_t> pool_sizes) {
  BoundTracker tracker;
  tracker.theta_ideal = theta_ideal;
  tracker.theta_empty = theta_empty;
  tracker.log_p_empty = log_p_empty;
  tracker.v_best = theta_empty + log_p_empty;
  tracker.enabled = true;
  for (std::size_t l = 0; l < h.max_length() && l < pool_sizes.size(); ++l) {
    if (pool_sizes[l] > 0 && !(h.alpha[l] < h.beta[l])) tracker.enabled = false;
  }
  for (std::size_t l = 0; l < pool_sizes.size(); ++l) {
    const auto size = static_cast<double>(pool_sizes[l]);
    if (!tracker.enabled) {
      tracker.m.push_back(size);
      continue;
    }
    if (pool_sizes[l] == 0) {
      tracker.m.push_back(0.0);
      continue;
    }
    const double numerator = theta_ideal - theta_empty;
    const double denominator = std::log((size + h.beta[l] - 1.0) / (size + h.alpha[l] - 1.0));
    double value = size;
    if (numerator <= 0.0) {
      value = 0.0;
    } else if (denominator > 0.0 && std::isfinite(denominator)) {
      value = numerator / denominator;
    }
    tracker.m.push_back(std::clamp(value, 0.0, size));
  }
  return tracker;
}

void update_bound(BoundTracker& tracker, const Hyperparams& h, std::span<const std::size_t> pool_sizes) {
  if (!tracker.enabled) return;
  const double numerator = tracker.theta_ideal + tracker.log_p_empty - tracker.v_best;
  for (std::size_t l = 0; l < tracker.m.size(); ++l) {
    const double previous = tracker.m[l];
    if (numerator <= 0.0) {
      tracker.m[l] = 0.0;
      continue;
    }
    const double below = previous + h.alpha[l] - 1.0;
    if (below <= 0.0) {
      tracker.m[l] = 0.0;  // log ratio is +infinity
      continue;
    }
    const double ratio = (static_cast<double>(pool_sizes[l]) + h.beta[l] - 1.0) / below;
    if (!(ratio > 1.0)) continue;  // bound not informative at this m
    tracker.m[l] = std::clamp(numerator / std::log(ratio), 0.0, previous);
  }
}

void SearchParams::validate() const {
  if (!(t0 > 0.0)) throw ConfigError("initial temperature must be positive");
  if (!(q_explore >= 0.0 && q_explore <= 1.0)) throw ConfigError("exploration probability must be in [0, 1]");
  if (bound_c && !(*bound_c > 0.0)) throw ConfigError("bound decay constant C must be positive");
}

std::string_view to_string(NeighborScore score) {
  switch (score) {
    case NeighborScore::purity: return "purity";
    case NeighborScore::lift: return "lift";
    case NeighborScore::gain: return "gain";
    default: return "coverage";
  }
}

NeighborScore neighbor_score_from_string(std::string_view name) {
  if (name == "coverage") return NeighborScore::coverage;
  if (name == "purity") return NeighborScore::purity;
  if (name == "lift") return NeighborScore::lift;
  if (name == "gain") return NeighborScore::gain;
  throw ConfigError("unknown neighbor score '" + std::string(name) + "'");
}

namespace {

bool coin(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

std::size_t uniform_pick(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

Bitset coverage_without(std::span<const std::size_t> rules, std::size_t removed, const CandidatePool& pool) {
  Bitset out(pool.n_rows());
  for (auto id : rules) {
    if (id != removed) out |= pool.coverage(id);
  }
  return out;
}

// Row counts of a candidate cover needed by the scores.
struct Cells {
  std::size_t covered = 0;
  std::size_t u_hits = 0;
  std::size_t treated = 0;
  std::size_t treated_positive = 0;
  std::size_t control_positive = 0;
};

template <class Count>
Cells cells_of(std::size_t covered, const OutcomePartition& part, NeighborScore score, Count&& count) {
  Cells c;
  c.covered = covered;
  c.u_hits = count(part.u);
  if (score == NeighborScore::gain) {
    c.treated = count(part.treated);
    c.treated_positive = count(part.treated_positive);
    c.control_positive = count(part.e0);
  }
  return c;
}

double bernoulli_ll(double k, double n) {
  if (n <= 0.0 || k <= 0.0 || k >= n) return 0.0;
  const double p = k / n;
  return k * std::log(p) + (n - k) * std::log1p(-p);
}

double arm_gain(double k_in, double n_in, double k_all, double n_all) {
  return bernoulli_ll(k_in, n_in) + bernoulli_ll(k_all - k_in, n_all - n_in) - bernoulli_ll(k_all, n_all);
}

double score_of(const Cells& c, const OutcomePartition& part, NeighborScore score) {
  const auto hits = static_cast<double>(c.u_hits);
  const auto size = static_cast<double>(c.covered);
  switch (score) {
    case NeighborScore::purity:
      return hits / (size + 1.0);
    case NeighborScore::lift: {
      if (c.covered == 0) return 0.0;
      const double base = static_cast<double>(part.u.count()) / static_cast<double>(part.u.size());
      return (hits - base * size) / std::sqrt(size);
    }
    case NeighborScore::gain: {
      const auto n = static_cast<double>(part.u.size());
      const auto nt = static_cast<double>(part.treated.count());
      const auto yt = static_cast<double>(part.treated_positive.count());
      const auto yc = static_cast<double>(part.e0.count());
      const auto t_in = static_cast<double>(c.treated);
      const auto c_in = size - t_in;
      const auto yt_in = static_cast<double>(c.treated_positive);
      const auto yc_in = static_cast<double>(c.control_positive);
      const double g = arm_gain(yt_in, t_in, yt, nt) + arm_gain(yc_in, c_in, yc, n - nt);
      if (t_in <= 0.0 || c_in <= 0.0 || nt - t_in <= 0.0 || n - nt - c_in <= 0.0) return g;
      const double effect_in = yt_in / t_in - yc_in / c_in;
      const double effect_out = (yt - yt_in) / (nt - t_in) - (yc - yc_in) / (n - nt - c_in);
      return effect_in >= effect_out ? g : -g;
    }
    default:
      return hits;
  }
}

// Rule to drop from `rules`, chosen among `eligible`.
std::size_t choose_removal(std::span<const std::size_t> rules, std::span<const std::size_t> eligible,
                           const CandidatePool& pool, const OutcomePartition& part, double explore_q,
                           NeighborScore score, std::mt19937_64& rng) {
  if (coin(rng, explore_q)) return eligible[uniform_pick(rng, eligible.size())];
  std::size_t best = eligible.front();
  double best_score = 0.0;
  bool first = true;
  for (auto id : eligible) {  // eligible is ascending, so ties keep the lower id
    const Bitset rest = coverage_without(rules, id, pool);
    const Cells c = cells_of(rest.count(), part, score, [&](const Bitset& m) { return Bitset::count_and(rest, m); });
    const double s = score_of(c, part, score);
    if (first || s > best_score) {
      best = id;
      best_score = s;
      first = false;
    }
  }
  return best;
}

// Rule to add to a set with coverage `base`, chosen among `eligible`.
std::size_t choose_addition(const Bitset& base, std::span<const std::size_t> eligible, const CandidatePool& pool,
                            const OutcomePartition& part, double explore_q, NeighborScore score,
                            std::mt19937_64& rng) {
  if (coin(rng, explore_q)) return eligible[uniform_pick(rng, eligible.size())];
  std::size_t best = eligible.front();
  double best_score = 0.0;
  bool first = true;
  const std::size_t base_count = base.count();
  for (auto id : eligible) {
    const Bitset& cov = pool.coverage(id);
    const std::size_t covered =
        score == NeighborScore::coverage ? 0 : base_count + cov.count() - Bitset::count_and(base, cov);
    const Cells c = cells_of(covered, part, score, [&](const Bitset& m) { return Bitset::count_or_and(base, cov, m); });
    const double s = score_of(c, part, score);
    if (first || s > best_score) {
      best = id;
      best_score = s;
      first = false;
    }
  }
  return best;
}

// Pool rules outside `rules` that cover (or, with covers == false, miss) row k.
std::vector<std::size_t> addable(std::span<const std::size_t> rules, std::size_t k, bool covers,
                                 const CandidatePool& pool) {
  std::vector<std::size_t> out;
  for (std::size_t id = 0; id < pool.size(); ++id) {
    if (pool.coverage(id).test(k) != covers) continue;
    if (std::binary_search(rules.begin(), rules.end(), id)) continue;
    out.push_back(id);
  }
  return out;
}

std::vector<std::size_t> erase_id(std::span<const std::size_t> rules, std::size_t id) {
  std::vector<std::size_t> out;
  for (auto r : rules) {
    if (r != id) out.push_back(r);
  }
  return out;
}

std::vector<std::size_t> insert_id(std::vector<std::size_t> rules, std::size_t id) {
  rules.insert(std::upper_bound(rules.begin(), rules.end(), id), id);
  return rules;
}

}  // namespace

Proposal apply_action(Action action, std::size_t k, std::span<const std::size_t> current,
                      const Bitset& current_coverage, const CandidatePool& pool, const OutcomePartition& part,
                      double explore_q, std::mt19937_64& rng, NeighborScore score) {
  std::vector<std::size_t> rules(current.begin(), current.end());
  std::sort(rules.begin(), rules.end());

  Proposal proposal;
  proposal.example = k;
  proposal.rule_ids = rules;

  const bool covered = current_coverage.test(k);
  // Rules that can be removed: in the eps case only those covering x_k can
  // uncover it; in the u case none covers x_k, so all are eligible.
  std::vector<std::size_t> removable;
  for (auto id : rules) {
    if (!covered || pool.coverage(id).test(k)) removable.push_back(id);
  }
  // Replacement rules: in the eps case they must leave x_k uncovered, in the u case cover it.
  const bool add_covers = !covered;

  const bool can_cut = !removable.empty();
  const bool can_add = !covered && !addable(rules, k, true, pool).empty();

  if (covered) {
    if (action == Action::add) action = Action::replace;
  } else {
    if (action == Action::cut && !can_cut) action = can_add ? Action::add : Action::none;
    if (action == Action::add && !can_add) action = can_cut ? Action::cut : Action::none;
    if (action == Action::replace && !can_cut) action = can_add ? Action::add : Action::none;
  }
  if ((action == Action::cut || action == Action::replace) && !can_cut) action = Action::none;

  switch (action) {
    case Action::none:
      break;
    case Action::add: {
      const auto eligible = addable(rules, k, true, pool);
      const std::size_t z = choose_addition(current_coverage, eligible, pool, part, explore_q, score, rng);
      proposal.rule_ids = insert_id(rules, z);
      break;
    }
    case Action::cut: {
      const std::size_t z = choose_removal(rules, removable, pool, part, explore_q, score, rng);
      proposal.rule_ids = erase_id(rules, z);
      break;
    }
    case Action::replace: {
      const std::size_t removed = choose_removal(rules, removable, pool, part, explore_q, score, rng);
      std::vector<std::size_t> reduced = erase_id(rules, removed);
      auto eligible = addable(reduced, k, add_covers, pool);
      std::erase(eligible, removed);
      if (eligible.empty()) {
        action = Action::cut;
        proposal.rule_ids = std::move(reduced);
        break;
      }
      const Bitset base = coverage_without(rules, removed, pool);
      const std::size_t added = choose_addition(base, eligible, pool, part, explore_q, score, rng);
      proposal.rule_ids = insert_id(std::move(reduced), added);
      break;
    }
  }
  proposal.action = action;
  return proposal;
}

Proposal propose(std::span<const std::size_t> current, const Bitset& current_coverage, const CandidatePool& pool,
                 const OutcomePartition& part, double explore_q, double add_factor, std::mt19937_64& rng,
                 NeighborScore score) {
  const Mispartition mis = mispartition(current_coverage, part);
  const Bitset candidates = mis.eps | mis.u;
  const std::size_t total = candidates.count();
  if (total == 0) {
    Proposal unchanged;
    unchanged.rule_ids.assign(current.begin(), current.end());
    std::sort(unchanged.rule_ids.begin(), unchanged.rule_ids.end());
    return unchanged;
  }
  const std::vector<std::size_t> rows = candidates.indices();
  const std::size_t k = rows[uniform_pick(rng, total)];

  Action action;
  const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (mis.eps.test(k)) {
    action = r < 0.5 ? Action::cut : Action::replace;
  } else {
    const double p_cut = 2.0 / 3.0 - add_factor / 3.0;
    const double p_add = add_factor / 3.0;
    action = r < p_cut ? Action::cut : (r < p_cut + p_add ? Action::add : Action::replace);
  }
  return apply_action(action, k, current, current_coverage, pool, part, explore_q, rng, score);
}

SearchResult search(const CandidatePool& pool, const Dataset& ds, const Hyperparams& h, const SearchParams& params,
                    const SearchObserver& observer) {
  params.validate();
  h.validate();
  if (pool.empty()) throw EmptyPoolError();
  if (pool.max_length() != h.max_length()) throw ConfigError("hyperparameters and pool disagree on the maximum rule length");
  if (pool.n_rows() != ds.n_rows()) throw std::invalid_argument("pool coverage does not match the dataset");

  const OutcomePartition part = partition_outcomes(ds);
  const std::vector<std::size_t> none;
  RuleSetModel current = fit_rule_set(none, ds, h, pool);

  SearchResult result;
  result.theta_empty = current.log_theta;
  result.bounds = init_bound(ideal_theta(ds, h), current.log_theta, current.log_prior, h, pool.sizes());
  result.best = current;

  double c = params.bound_c.value_or(result.bounds.sum());
  if (!(c > 0.0)) c = 1.0;

  std::mt19937_64 rng(params.seed);
  result.trace.reserve(params.n_iter);
  for (std::size_t t = 0; t < params.n_iter; ++t) {
    const double add_factor = std::exp(-result.bounds.sum() / c);
    const Proposal proposal =
        propose(current.rule_ids, current.coverage, pool, part, params.q_explore, add_factor, rng, params.neighbor_score);

    RuleSetModel candidate =
        proposal.action == Action::none ? current : fit_rule_set(proposal.rule_ids, ds, h, pool, &current.weights);

    if (candidate.log_f >= result.bounds.v_best) {
      result.best = candidate;
      result.bounds.v_best = candidate.log_f;
    }
    update_bound(result.bounds, h, pool.sizes());

    const double temperature = std::pow(params.t0, 1.0 - static_cast<double>(t) / static_cast<double>(params.n_iter));
    const double delta = candidate.log_f - current.log_f;
    const double draw = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const bool accepted = delta >= 0.0 || draw < std::exp(delta / temperature);
    if (accepted) current = std::move(candidate);

    TraceRow row;
    row.t = t;
    row.action = proposal.action;
    row.accepted = accepted;
    row.f_current = current.log_f;
    row.f_best = result.bounds.v_best;
    row.n_rules = current.rule_ids.size();
    row.q = precision_q(current.coverage, part);
    row.sum_m = result.bounds.sum();
    result.trace.push_back(row);
    if (observer) observer(t, result.best);
  }
  return result;
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace) {
  out << "t,action,accepted,F_current,F_best,n_rules,Q,sum_m_l\n";
  out << std::setprecision(12);
  for (const auto& row : trace) {
    out << row.t << ',' << to_string(row.action) << ',' << (row.accepted ? 1 : 0) << ',' << row.f_current << ','
        << row.f_best << ',' << row.n_rules << ',' << row.q << ',' << row.sum_m << '\n';
  }
}

}  // namespace crs
