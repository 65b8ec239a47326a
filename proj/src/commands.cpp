#include "crs/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "crs/data.hpp"
#include "crs/errors.hpp"
#include "crs/log.hpp"
#include "crs/mining.hpp"
#include "crs/model.hpp"
#include "crs/parallel.hpp"
#include "crs/screening.hpp"
#include "crs/search.hpp"
#include "crs/synth.hpp"

namespace crs {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const EmptyPoolError*>(&e)) return kExitEmptyPool;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  return kExitNumerical;
}

std::vector<bool> pareto_frontier(std::span<const FrontierPoint> points) {
  std::vector<bool> flags(points.size(), false);
  for (std::size_t a = 0; a < points.size(); ++a) {
    const auto& p = points[a];
    if (!std::isfinite(p.size) || !std::isfinite(p.effect)) continue;
    bool dominated = false;
    for (std::size_t b = 0; b < points.size() && !dominated; ++b) {
      const auto& q = points[b];
      if (b == a || !std::isfinite(q.size) || !std::isfinite(q.effect)) continue;
      dominated = q.size >= p.size && q.effect >= p.effect && (q.size > p.size || q.effect > p.effect);
    }
    flags[a] = !dominated;
  }
  return flags;
}

namespace {

// Non-finite numbers become the string "undefined".
json sanitize(const json& j) {
  if (j.is_number_float()) {
    const double v = j.get<double>();
    return std::isfinite(v) ? j : json("undefined");
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& e : j) out.push_back(sanitize(e));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) out[k] = sanitize(v);
    return out;
  }
  return j;
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "undefined";
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

// Output files are staged in memory and only written once the command succeeded.
class OutputSet {
 public:
  void add(std::string name, std::string content) { files_.emplace_back(std::move(name), std::move(content)); }

  void add_json(std::string name, const json& j) { add(std::move(name), sanitize(j).dump(2) + "\n"); }

  void commit(const fs::path& dir) const {
    fs::create_directories(dir);
    for (const auto& [name, content] : files_) {
      const fs::path target = dir / name;
      const fs::path staging = dir / (name + ".tmp");
      {
        std::ofstream out(staging, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + staging.string());
        out << content;
        if (!out) throw ConfigError("cannot write " + staging.string());
      }
      fs::rename(staging, target);
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

void check_output_dir(const RunConfig& config) {
  if (config.out.empty()) throw ConfigError("an output directory is required (--out)");
  const fs::path dir(config.out);
  std::error_code ec;
  if (!fs::exists(dir, ec)) return;
  if (!fs::is_directory(dir, ec)) throw ConfigError("output path exists and is not a directory: " + config.out);
  if (!fs::is_empty(dir, ec) && !config.force) {
    throw ConfigError("output directory " + config.out + " is not empty; pass --force to overwrite");
  }
}

struct Prepared {
  Dataset train;
  Dataset validation;
  Dataset test;
};

Prepared prepare(const RunConfig& config) {
  config.validate();
  check_output_dir(config);
  if (config.schema.empty()) throw ConfigError("a schema file is required (--schema)");
  if (config.data.empty()) throw ConfigError("a data file is required (--data)");
  const Schema schema = Schema::from_json_file(config.schema);
  const RawTable table = load_csv(config.data, schema);
  const Dataset ds = binarize(table, config.bins);
  auto parts = split(ds, config.split, config.seed);
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

Bitset cover_on(std::span<const std::size_t> rule_ids, const CandidatePool& pool, const Dataset& ds) {
  Bitset out(ds.n_rows());
  for (auto id : rule_ids) out |= rule_coverage(pool.at(id).rule, ds);
  return out;
}

double safe_ate(const Bitset& coverage, const Dataset& ds, double l2) {
  if (coverage.none()) return std::numeric_limits<double>::quiet_NaN();
  try {
    return matched_ate(coverage, ds, l2);
  } catch (const DataError&) {
    return std::numeric_limits<double>::quiet_NaN();
  } catch (const NumericalError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

struct Evaluation {
  double size = 0.0;  // fraction of rows in the subgroup
  double ate = 0.0;
};

Evaluation evaluate(std::span<const std::size_t> rule_ids, const CandidatePool& pool, const Dataset& ds,
                    double l2) {
  const Bitset cov = cover_on(rule_ids, pool, ds);
  return {static_cast<double>(cov.count()) / static_cast<double>(ds.n_rows()), safe_ate(cov, ds, l2)};
}

double baseline_ate(const Dataset& ds, double l2) {
  Bitset all(ds.n_rows());
  all.fill();
  return safe_ate(all, ds, l2);
}

json split_sizes(const Prepared& p) {
  return {{"train", p.train.n_rows()}, {"validation", p.validation.n_rows()}, {"test", p.test.n_rows()}};
}

json hyperparams_json(const Hyperparams& h) {
  return {{"alpha", h.alpha}, {"beta", h.beta}, {"prior_mean", h.prior_mean}, {"prior_variance", h.prior_variance}};
}

}  // namespace

void cmd_mine(const RunConfig& config) {
  const Prepared data = prepare(config);
  const MiningResult mined = mine_candidates(data.train, config.mining());

  json doc = pool_to_json(mined.pool, data.train);
  doc["n_train_rows"] = data.train.n_rows();
  doc["n_z_positive"] = mined.z.positive_rows().count();
  doc["n_itemsets"] = mined.n_itemsets;
  doc["pool_size"] = mined.pool.size();
  doc["pool_sizes_by_length"] = mined.pool.sizes();

  OutputSet out;
  out.add_json("pool.json", doc);
  out.add("config.toml", config.to_toml());
  out.commit(config.out);
  log_info("wrote " + std::to_string(mined.pool.size()) + " rules to " + (fs::path(config.out) / "pool.json").string());
}

void cmd_fit(const RunConfig& config) {
  const Prepared data = prepare(config);
  const MiningResult mined = mine_candidates(data.train, config.mining());
  const Hyperparams h = config.hyperparams(mined.pool.sizes());
  const SearchResult result = search(mined.pool, data.train, h, config.search());
  const RuleSetModel& best = result.best;

  json model = model_to_json(best, mined.pool, data.train);
  model["hyperparams"] = hyperparams_json(h);

  std::ostringstream trace;
  write_trace_csv(trace, result.trace);

  const double l2 = config.propensity_l2;
  const Evaluation on_validation = evaluate(best.rule_ids, mined.pool, data.validation, l2);
  const Evaluation on_test = evaluate(best.rule_ids, mined.pool, data.test, l2);
  json report = {
      {"rows", split_sizes(data)},
      {"n_itemsets", mined.n_itemsets},
      {"pool_size", mined.pool.size()},
      {"n_rules", best.rule_ids.size()},
      {"logF", best.log_f},
      {"bound_sum_final", result.bounds.sum()},
      {"bound_enabled", result.bounds.enabled},
      {"sign_conditions_hold", best.weights.sign_conditions()},
      {"validation",
       {{"subgroup_fraction", on_validation.size},
        {"subgroup_ate", on_validation.ate},
        {"baseline_ate", baseline_ate(data.validation, l2)}}},
      {"test",
       {{"subgroup_fraction", on_test.size},
        {"subgroup_ate", on_test.ate},
        {"baseline_ate", baseline_ate(data.test, l2)}}},
  };

  OutputSet out;
  out.add_json("model.json", model);
  out.add("trace.csv", trace.str());
  out.add_json("report.json", report);
  out.add("config.toml", config.to_toml());
  out.commit(config.out);
}

void cmd_sweep(const RunConfig& config) {
  const Prepared data = prepare(config);
  const MiningResult mined = mine_candidates(data.train, config.mining());

  struct GridPoint {
    double alpha = 0.0;
    double beta_scale = 0.0;
    RuleSetModel model;
    Evaluation validation;
    Evaluation test;
  };
  std::vector<GridPoint> grid;
  for (double a : config.sweep_alpha) {
    for (double b : config.sweep_beta_scale) grid.push_back({a, b, {}, {}, {}});
  }

  const double l2 = config.propensity_l2;
  parallel_for(grid.size(), config.threads, [&](std::size_t k) {
    GridPoint& g = grid[k];
    const Hyperparams h = config.hyperparams(mined.pool.sizes(), g.alpha, g.beta_scale);
    g.model = search(mined.pool, data.train, h, config.search()).best;
    g.validation = evaluate(g.model.rule_ids, mined.pool, data.validation, l2);
  });

  std::vector<FrontierPoint> points;
  for (const auto& g : grid) points.push_back({g.validation.size, g.validation.ate});
  const std::vector<bool> frontier = pareto_frontier(points);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (frontier[k]) grid[k].test = evaluate(grid[k].model.rule_ids, mined.pool, data.test, l2);
  }

  std::ostringstream csv;
  csv << "alpha,beta_scale,n_rules,logF,validation_size,validation_ate,frontier,test_size,test_ate,rules\n";
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const GridPoint& g = grid[k];
    std::string rules;
    for (auto id : g.model.rule_ids) {
      if (!rules.empty()) rules += " OR ";
      rules += "(" + mined.pool.at(id).rule.describe(data.train) + ")";
    }
    csv << csv_number(g.alpha) << ',' << csv_number(g.beta_scale) << ',' << g.model.rule_ids.size() << ','
        << csv_number(g.model.log_f) << ',' << csv_number(g.validation.size) << ',' << csv_number(g.validation.ate)
        << ',' << (frontier[k] ? 1 : 0) << ',';
    if (frontier[k]) {
      csv << csv_number(g.test.size) << ',' << csv_number(g.test.ate);
    } else {
      csv << ',';
    }
    csv << ",\"" << rules << "\"\n";
  }

  json summary = {{"rows", split_sizes(data)},
                  {"pool_size", mined.pool.size()},
                  {"grid_points", grid.size()},
                  {"frontier_points", std::count(frontier.begin(), frontier.end(), true)},
                  {"validation_baseline_ate", baseline_ate(data.validation, l2)},
                  {"test_baseline_ate", baseline_ate(data.test, l2)}};

  OutputSet out;
  out.add("sweep.csv", csv.str());
  out.add_json("sweep_summary.json", summary);
  out.add("config.toml", config.to_toml());
  out.commit(config.out);
}

void cmd_synth(const RunConfig& config) {
  config.validate();
  check_output_dir(config);
  const RecoveryReport report = run_recovery_experiment(config.synthetic(), config.recovery(), config.synth_repeats);

  std::ostringstream csv;
  csv << "repeat,iteration,error,elapsed_seconds\n";
  for (std::size_t r = 0; r < report.runs.size(); ++r) {
    const auto& run = report.runs[r];
    for (std::size_t t = 0; t < run.errors.size(); ++t) {
      csv << r << ',' << t + 1 << ',' << csv_number(run.errors[t]) << ',' << csv_number(run.elapsed[t]) << '\n';
    }
  }

  json runs = json::array();
  for (const auto& run : report.runs) {
    runs.push_back({{"seed", run.seed},
                    {"final_error", run.errors.empty() ? 0.0 : run.errors.back()},
                    {"true_share", run.true_share},
                    {"pool_size", run.pool_size},
                    {"n_rules", run.best_rule_ids.size()},
                    {"logF", run.best.log_f}});
  }
  const json summary = {
      {"repeats", report.runs.size()},
      {"n", config.synth_n},
      {"j", config.synth_j},
      {"true_rules", config.synth_true_rules},
      {"pool_size_m", config.top_m},
      {"n_iter", config.n_iter},
      {"mean_final_error", report.mean_final_error},
      {"std_final_error", report.std_final_error},
      {"mean_iterations_to_error_below_0.05",
       report.runs_reaching_005 > 0 ? json(report.mean_iterations_to_005) : json("undefined")},
      {"runs_reaching_error_below_0.05", report.runs_reaching_005},
      {"mean_error", report.mean_error},
      {"std_error", report.std_error},
      {"runs", runs},
  };

  OutputSet out;
  out.add("curves.csv", csv.str());
  out.add_json("summary.json", summary);
  out.add("config.toml", config.to_toml());
  out.commit(config.out);
}

}  // namespace crs
