#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "crs/cli.hpp"
#include "crs/commands.hpp"
#include "crs/config.hpp"
#include "crs/errors.hpp"

using namespace crs;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

// Small table with a treatment effect confined to segment == "a".
void write_dataset(const fs::path& dir) {
  std::ofstream csv(dir / "data.csv");
  csv << "treated,outcome,score,segment\n";
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 400; ++i) {
    const bool t = coin(rng);
    const int seg = static_cast<int>(rng() % 3);
    const double score = normal(rng);
    const bool base = std::bernoulli_distribution(0.3)(rng);
    const bool y = base || (t && seg == 0 && std::bernoulli_distribution(0.8)(rng));
    csv << t << ',' << y << ',' << score << ',' << "abc"[seg] << '\n';
  }
  std::ofstream schema(dir / "schema.json");
  schema << R"({"treatment": "treated", "outcome": "outcome", "numeric": ["score"], "categorical": ["segment"]})";
  std::ofstream config(dir / "config.toml");
  config << "n_trees = 10\ntop_m = 50\nn_iter = 30\nmin_support = 0.1\n";
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("flat toml values") {
  const auto j = parse_flat_toml(
      "# comment\n"
      "name = \"a \\\"b\\\"\"  # trailing\n"
      "path = 'C:\\raw'\n"
      "n = 42\n"
      "x = -1.5e-3\n"
      "on = true\n"
      "grid = [1, 2.5, 3]\n"
      "big = inf\n");
  CHECK(j["name"] == "a \"b\"");
  CHECK(j["path"] == "C:\\raw");
  CHECK(j["n"] == 42);
  CHECK(j["x"].get<double>() == doctest::Approx(-1.5e-3));
  CHECK(j["on"] == true);
  CHECK(j["grid"].size() == 3);
  CHECK(std::isinf(j["big"].get<double>()));

  CHECK_THROWS_AS(parse_flat_toml("[table]\n"), ConfigError);
  CHECK_THROWS_AS(parse_flat_toml("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_flat_toml("a = \n"), ConfigError);
  CHECK_THROWS_AS(parse_flat_toml("a = \"open\n"), ConfigError);
}

TEST_CASE("config round-trips through toml and json") {
  RunConfig c;
  c.data = "x.csv";
  c.seed = 77;
  c.t0 = 0.25;
  c.bound_c = 3.0;
  c.sweep_beta_scale = {0.1, 1.0 / 3.0};
  c.neighbor_score = "lift";
  const RunConfig from_toml = RunConfig::from_toml(c.to_toml());
  CHECK(from_toml.to_json() == c.to_json());
  const RunConfig from_json = RunConfig::from_json(c.to_json());
  CHECK(from_json.to_json() == c.to_json());
  CHECK(from_toml.sweep_beta_scale[1] == 1.0 / 3.0);
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(RunConfig::from_toml("n_tree = 5\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_toml("n_trees = \"many\"\n"), ConfigError);
  RunConfig c;
  c.split = {0.5, 0.2};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.neighbor_score = "recall";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.validity_correction = "holm";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(RunConfig{}.validate());
}

TEST_CASE("pareto frontier") {
  const std::vector<FrontierPoint> pts{{0.1, 0.5}, {0.2, 0.4}, {0.05, 0.3}, {0.2, 0.4}, {0.3, std::nan("")}};
  CHECK(pareto_frontier(pts) == std::vector<bool>{true, true, false, true, false});
}

TEST_CASE("exit codes follow the error type") {
  CHECK(exit_code_for(ConfigError("x")) == kExitConfig);
  CHECK(exit_code_for(DataError("x")) == kExitData);
  CHECK(exit_code_for(EmptyPoolError()) == kExitEmptyPool);
  CHECK(exit_code_for(NumericalError("x")) == kExitNumerical);
}

TEST_CASE("cli argument errors") {
  CHECK(cli({}) == kExitConfig);
  CHECK(cli({"--help"}) == kExitOk);
  CHECK(cli({"fit", "--bogus"}) == kExitConfig);
  const TempDir dir("crs_cli_args");
  std::string err;
  CHECK(cli({"fit", "--out", (dir.path / "o").string()}, &err) == kExitConfig);
  CHECK(err.find("error:") == 0);
  CHECK_FALSE(fs::exists(dir.path / "o"));
  CHECK(cli({"fit", "--config", (dir.path / "none.toml").string()}) == kExitConfig);
}

TEST_CASE("cli fit writes outputs once and reproducibly") {
  const TempDir dir("crs_cli_fit");
  write_dataset(dir.path);
  const std::string out = (dir.path / "run").string();
  const std::vector<std::string> base{"fit", "--config", (dir.path / "config.toml").string(),
                                      "--data", (dir.path / "data.csv").string(),
                                      "--schema", (dir.path / "schema.json").string(),
                                      "--out", out, "--seed", "3", "-q"};
  REQUIRE(cli(base) == kExitOk);
  for (const char* f : {"model.json", "trace.csv", "report.json", "config.toml"}) CHECK(fs::exists(fs::path(out) / f));
  const std::string model = slurp(fs::path(out) / "model.json");

  CHECK(cli(base) == kExitConfig);  // non-empty output directory
  auto forced = base;
  forced.push_back("--force");
  CHECK(cli(forced) == kExitOk);
  CHECK(slurp(fs::path(out) / "model.json") == model);

  // the saved config reproduces the run
  const std::string again = (dir.path / "again").string();
  CHECK(cli({"fit", "--config", (fs::path(out) / "config.toml").string(), "--out", again, "-q"}) == kExitOk);
  CHECK(slurp(fs::path(again) / "model.json") == model);
}

TEST_CASE("cli data errors leave no outputs") {
  const TempDir dir("crs_cli_bad");
  write_dataset(dir.path);
  {
    std::ofstream bad(dir.path / "data.csv", std::ios::app);
    bad << "1,1,oops,a\n";
  }
  const std::string out = (dir.path / "run").string();
  CHECK(cli({"mine", "--data", (dir.path / "data.csv").string(), "--schema", (dir.path / "schema.json").string(),
             "--out", out, "-q"}) == kExitData);
  CHECK((!fs::exists(out) || fs::is_empty(out)));
}
