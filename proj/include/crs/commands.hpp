#pragma once

#include <exception>
#include <filesystem>
#include <span>
#include <vector>

#include "crs/config.hpp"

namespace crs {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitEmptyPool = 4,
  kExitNumerical = 5,
};

/// Maps the library's exception types onto exit codes.
int exit_code_for(const std::exception& e);

/// Pool audit: pool.json.
void cmd_mine(const RunConfig& config);
/// model.json, trace.csv, report.json.
void cmd_fit(const RunConfig& config);
/// sweep.csv with frontier flags.
void cmd_sweep(const RunConfig& config);
/// curves.csv and summary.json.
void cmd_synth(const RunConfig& config);

struct FrontierPoint {
  double size = 0.0;
  double effect = 0.0;
};

/// flags[k] is true when no other point has size and effect both at least as
/// large and one strictly larger. Points with a non-finite coordinate are never
/// on the frontier.
std::vector<bool> pareto_frontier(std::span<const FrontierPoint> points);

}  // namespace crs
