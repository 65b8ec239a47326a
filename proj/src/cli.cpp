#include "crs/cli.hpp"

#include <CLI11.hpp>
#include <optional>

#include "crs/commands.hpp"
#include "crs/config.hpp"
#include "crs/errors.hpp"
#include "crs/log.hpp"

namespace crs {

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> data;
  std::optional<std::string> schema;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool force = false;
  bool quiet = false;
  bool verbose = false;
};

void add_common(CLI::App& cmd, Flags& f) {
  cmd.add_option("--config", f.config, "TOML or JSON config file");
  cmd.add_option("--data", f.data, "CSV data file");
  cmd.add_option("--schema", f.schema, "JSON schema naming treatment, outcome and attribute columns");
  cmd.add_option("--out", f.out, "output directory");
  cmd.add_option("--seed", f.seed, "random seed");
  cmd.add_option("--threads", f.threads, "worker threads for sweeps and repeats");
  cmd.add_flag("--force", f.force, "write into a non-empty output directory");
  cmd.add_flag("-q,--quiet", f.quiet, "only print errors");
  cmd.add_flag("-v,--verbose", f.verbose, "print progress");
}

RunConfig resolve(const Flags& f) {
  RunConfig config = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
  if (f.data) config.data = *f.data;
  if (f.schema) config.schema = *f.schema;
  if (f.out) config.out = *f.out;
  if (f.seed) config.seed = *f.seed;
  if (f.threads) config.threads = *f.threads;
  if (f.force) config.force = true;
  return config;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal rule set discovery: mine candidate rules, fit rule sets, sweep priors, benchmark recovery."};
  app.name("crs_cli");
  app.require_subcommand(1);

  Flags flags;
  CLI::App* mine = app.add_subcommand("mine", "screen candidate rules and write pool.json");
  CLI::App* fit = app.add_subcommand("fit", "learn a rule set and write model.json, trace.csv, report.json");
  CLI::App* sweep = app.add_subcommand("sweep", "fit over the prior grid and write the size/effect frontier");
  CLI::App* synth = app.add_subcommand("synth", "synthetic recovery benchmark");
  for (CLI::App* cmd : {mine, fit, sweep, synth}) add_common(*cmd, flags);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  const LogLevel previous = log_level();
  set_log_level(flags.quiet ? LogLevel::quiet : (flags.verbose ? LogLevel::info : LogLevel::warning));
  int code = kExitOk;
  try {
    const RunConfig config = resolve(flags);
    if (mine->parsed()) cmd_mine(config);
    else if (fit->parsed()) cmd_fit(config);
    else if (sweep->parsed()) cmd_sweep(config);
    else cmd_synth(config);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    code = exit_code_for(e);
  }
  set_log_level(previous);
  return code;
}

}  // namespace crs
