#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "crs/bitset.hpp"
#include "crs/data.hpp"
#include "crs/mining.hpp"
#include "crs/model.hpp"

namespace crs {

/// E0 = {T=0, y=1}, E1 = {T=1, y=0}, U = {T=y}.
struct OutcomePartition {
  Bitset e0;
  Bitset e1;
  Bitset u;
  Bitset treated;
  Bitset treated_positive;
};

OutcomePartition partition_outcomes(const Dataset& ds);

/// |I_A & U| / |U|; 0 (with a warning) when U is empty.
double precision_q(const Bitset& coverage, const OutcomePartition& part);

/// Rows the current cover gets wrong for sure (eps: covered rows of E0 u E1)
/// and rows it may be missing (u: uncovered rows of U).
struct Mispartition {
  Bitset eps;
  Bitset u;

  bool perfect() const { return eps.none() && u.none(); }
};

Mispartition mispartition(const Bitset& coverage, const OutcomePartition& part);

enum class Action { none, add, cut, replace };

/// Ranking of exploit moves. coverage: precision_q of the resulting set.
/// purity: |I_A & U| / (|I_A| + 1) of the resulting set.
/// lift: (|I_A & U| - |I_A| |U| / n) / sqrt(|I_A|), excess U coverage in standard units.
/// gain: likelihood-ratio statistic of splitting each arm's outcome rate by
/// coverage, signed by whether the covered rows show the larger effect.
enum class NeighborScore { coverage, purity, lift, gain };
std::string_view to_string(NeighborScore score);
NeighborScore neighbor_score_from_string(std::string_view name);
std::string_view to_string(Action action);

/// Per-length upper bounds on the number of rules in a MAP model, tightened as
/// better objective values are found.
struct BoundTracker {
  std::vector<double> m;
  double v_best = 0.0;
  double theta_ideal = 0.0;
  double theta_empty = 0.0;
  double log_p_empty = 0.0;
  bool enabled = false;  // requires alpha_l < beta_l for every length

  double sum() const;
};

/// m_l at t = 0 (from the empty-set fit); v_best starts at F(empty).
BoundTracker init_bound(double theta_ideal, double theta_empty, double log_p_empty, const Hyperparams& h,
                        std::span<const std::size_t> pool_sizes);

/// One fixed-point update from tracker.v_best and the previous m_l; results are
/// clamped to [0, previous].
void update_bound(BoundTracker& tracker, const Hyperparams& h, std::span<const std::size_t> pool_sizes);

struct SearchParams {
  std::size_t n_iter = 150;
  double t0 = 1.0;
  double q_explore = 0.1;
  std::optional<double> bound_c;  // default: sum of the initial bounds
  NeighborScore neighbor_score = NeighborScore::gain;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Proposal {
  std::vector<std::size_t> rule_ids;  // ascending
  Action action = Action::none;
  std::optional<std::size_t> example;
};

/// Performs `action` seeded by example row k. `k_covered` distinguishes the eps
/// case (k covered but in E0 u E1) from the u case. Rules are chosen uniformly
/// with probability q, else by the best neighbor score of the resulting set (ties: lower id).
/// Infeasible actions fall back to a feasible one; returns Action::none if there is none.
Proposal apply_action(Action action, std::size_t k, std::span<const std::size_t> current,
                      const Bitset& current_coverage, const CandidatePool& pool, const OutcomePartition& part,
                      double explore_q, std::mt19937_64& rng,
                      NeighborScore score = NeighborScore::coverage);

/// Draws k from eps u u, picks an action (eps: CUT/REPLACE at 1/2 each; u: CUT,
/// ADD, REPLACE with the bound-modulated weights) and applies it.
/// add_factor = exp(-sum_l m_l / C).
Proposal propose(std::span<const std::size_t> current, const Bitset& current_coverage, const CandidatePool& pool,
                 const OutcomePartition& part, double explore_q, double add_factor, std::mt19937_64& rng,
                 NeighborScore score = NeighborScore::coverage);

struct TraceRow {
  std::size_t t = 0;
  Action action = Action::none;
  bool accepted = false;
  double f_current = 0.0;
  double f_best = 0.0;
  std::size_t n_rules = 0;
  double q = 0.0;
  double sum_m = 0.0;
};

struct SearchResult {
  RuleSetModel best;
  std::vector<TraceRow> trace;
  BoundTracker bounds;
  double theta_empty = 0.0;
};

/// Called after every iteration with the best model so far.
using SearchObserver = std::function<void(std::size_t t, const RuleSetModel& best)>;

/// Annealed MAP search over rule sets from the pool, starting at the empty set.
SearchResult search(const CandidatePool& pool, const Dataset& ds, const Hyperparams& h, const SearchParams& params,
                    const SearchObserver& observer = {});

void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace);

}  // namespace crs
