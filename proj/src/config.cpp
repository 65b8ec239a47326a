#include "crs/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

#include "crs/errors.hpp"

namespace crs {

namespace {

using nlohmann::json;

[[noreturn]] void bad_value(const std::string& key, const char* expected) {
  throw ConfigError("config key '" + key + "': expected " + expected);
}

std::size_t as_count(const std::string& key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::size_t>(v.get<std::int64_t>());
  bad_value(key, "a non-negative integer");
}

std::uint64_t as_u64(const std::string& key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  bad_value(key, "a non-negative integer");
}

double as_real(const std::string& key, const json& v) {
  if (!v.is_number()) bad_value(key, "a number");
  return v.get<double>();
}

struct Field {
  const char* name;
  std::function<std::optional<json>(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const json&)> set;
};

template <typename T>
Field field(const char* name, T RunConfig::*member) {
  Field f;
  f.name = name;
  f.get = [member](const RunConfig& c) -> std::optional<json> {
    if constexpr (std::is_same_v<T, std::optional<std::size_t>> || std::is_same_v<T, std::optional<double>>) {
      if (!(c.*member)) return std::nullopt;
      return json(*(c.*member));
    } else {
      return json(c.*member);
    }
  };
  f.set = [member](RunConfig& c, const std::string& key, const json& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) bad_value(key, "a string");
      c.*member = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) bad_value(key, "true or false");
      c.*member = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      c.*member = as_u64(key, v);
    } else if constexpr (std::is_same_v<T, std::size_t>) {
      c.*member = as_count(key, v);
    } else if constexpr (std::is_same_v<T, double>) {
      c.*member = as_real(key, v);
    } else if constexpr (std::is_same_v<T, std::optional<std::size_t>>) {
      if (v.is_null()) c.*member = std::nullopt;
      else c.*member = as_count(key, v);
    } else if constexpr (std::is_same_v<T, std::optional<double>>) {
      if (v.is_null()) c.*member = std::nullopt;
      else c.*member = as_real(key, v);
    } else {
      static_assert(std::is_same_v<T, std::vector<double>>);
      if (!v.is_array()) bad_value(key, "an array of numbers");
      std::vector<double> out;
      for (const auto& e : v) out.push_back(as_real(key, e));
      c.*member = std::move(out);
    }
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field("data", &RunConfig::data),
      field("schema", &RunConfig::schema),
      field("out", &RunConfig::out),
      field("seed", &RunConfig::seed),
      field("force", &RunConfig::force),
      field("threads", &RunConfig::threads),
      field("bins", &RunConfig::bins),
      field("split", &RunConfig::split),
      field("n_trees", &RunConfig::n_trees),
      field("max_depth", &RunConfig::max_depth),
      field("min_leaf", &RunConfig::min_leaf),
      field("features_per_split", &RunConfig::features_per_split),
      field("bootstrap", &RunConfig::bootstrap),
      field("min_support", &RunConfig::min_support),
      field("max_rule_length", &RunConfig::max_rule_length),
      field("validity_alpha", &RunConfig::validity_alpha),
      field("validity_correction", &RunConfig::validity_correction),
      field("top_m", &RunConfig::top_m),
      field("propensity_l2", &RunConfig::propensity_l2),
      field("alpha", &RunConfig::alpha),
      field("beta_scale", &RunConfig::beta_scale),
      field("prior_mean", &RunConfig::prior_mean),
      field("prior_variance", &RunConfig::prior_variance),
      field("n_iter", &RunConfig::n_iter),
      field("t0", &RunConfig::t0),
      field("q_explore", &RunConfig::q_explore),
      field("neighbor_score", &RunConfig::neighbor_score),
      field("bound_c", &RunConfig::bound_c),
      field("sweep_alpha", &RunConfig::sweep_alpha),
      field("sweep_beta_scale", &RunConfig::sweep_beta_scale),
      field("synth_n", &RunConfig::synth_n),
      field("synth_j", &RunConfig::synth_j),
      field("synth_true_rules", &RunConfig::synth_true_rules),
      field("synth_repeats", &RunConfig::synth_repeats),
      field("synth_test_fraction", &RunConfig::synth_test_fraction),
  };
  return table;
}

MultipleTesting correction_from(const std::string& name) {
  if (name == "none") return MultipleTesting::none;
  if (name == "bonferroni") return MultipleTesting::bonferroni;
  throw ConfigError("validity_correction must be \"none\" or \"bonferroni\", got \"" + name + "\"");
}

// ---- flat TOML ----

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class LineParser {
 public:
  LineParser(const std::string& text, std::size_t line) : s_(text), line_(line) {}

  json value() {
    skip_space();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"') return basic_string();
    if (c == '\'') return literal_string();
    if (c == '[') return array();
    return scalar();
  }

  void expect_end() {
    skip_space();
    if (pos_ < s_.size() && s_[pos_] != '#') fail("unexpected text after value");
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  json basic_string() {
    ++pos_;
    std::string out;
    while (true) {
      if (pos_ >= s_.size()) fail("unterminated string");
      const char c = s_[pos_++];
      if (c == '"') break;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (pos_ >= s_.size()) fail("unterminated escape");
      const char e = s_[pos_++];
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
    return out;
  }

  json literal_string() {
    ++pos_;
    const auto end = s_.find('\'', pos_);
    if (end == std::string::npos) fail("unterminated string");
    std::string out = s_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }

  json array() {
    ++pos_;
    json out = json::array();
    while (true) {
      skip_space();
      if (pos_ >= s_.size()) fail("unterminated array (arrays must fit on one line)");
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      out.push_back(value());
      skip_space();
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
      } else if (pos_ >= s_.size() || s_[pos_] != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  json scalar() {
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && s_[end] != '#' && s_[end] != ' ' &&
           s_[end] != '\t') {
      ++end;
    }
    std::string token = s_.substr(pos_, end - pos_);
    pos_ = end;
    if (token == "true") return true;
    if (token == "false") return false;
    std::string digits;
    for (char c : token) {
      if (c != '_') digits += c;
    }
    if (digits == "inf" || digits == "+inf") return std::numeric_limits<double>::infinity();
    if (digits == "-inf") return -std::numeric_limits<double>::infinity();
    if (digits == "nan" || digits == "+nan" || digits == "-nan") return std::numeric_limits<double>::quiet_NaN();
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    const char* first = digits.data();
    const char* last = digits.data() + digits.size();
    if (!digits.empty() && *first == '+') ++first;
    if (first == last) fail("missing value");
    if (is_float) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) fail("invalid number '" + token + "'");
      return v;
    }
    if (*first == '-') {
      std::int64_t v = 0;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last) fail("invalid integer '" + token + "'");
      return v;
    }
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) fail("invalid value '" + token + "'");
    return v;
  }

  const std::string& s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string out = buf;
  if (out.find_first_of(".eE") == std::string::npos) out += ".0";
  return out;
}

std::string format_value(const json& v) {
  if (v.is_string()) {
    std::string out = "\"";
    for (char c : v.get<std::string>()) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default: out += c;
      }
    }
    return out + "\"";
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return format_real(v.get<double>());
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) out += ", ";
      out += format_value(v[k]);
    }
    return out + "]";
  }
  throw ConfigError("value cannot be written as flat TOML: " + v.dump());
}

bool bare_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  }
  return true;
}

}  // namespace

nlohmann::json parse_flat_toml(const std::string& text) {
  json table = json::object();
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (line == 1 && raw.rfind("\xEF\xBB\xBF", 0) == 0) raw.erase(0, 3);
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s[0] == '[') throw ConfigError("config line " + std::to_string(line) + ": tables are not supported, keys are flat");
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (!bare_key(key)) throw ConfigError("config line " + std::to_string(line) + ": invalid key '" + key + "'");
    if (table.contains(key)) throw ConfigError("config line " + std::to_string(line) + ": duplicate key '" + key + "'");
    const std::string rest = s.substr(eq + 1);
    LineParser parser(rest, line);
    json value = parser.value();
    parser.expect_end();
    table[key] = std::move(value);
  }
  return table;
}

std::string write_flat_toml(const nlohmann::json& table) {
  if (!table.is_object()) throw ConfigError("flat TOML needs a table of keys");
  std::string out;
  for (const auto& [key, value] : table.items()) {
    if (value.is_null()) continue;
    out += key + " = " + format_value(value) + "\n";
  }
  return out;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::ordered_json ordered;
  for (const auto& f : fields()) {
    if (auto v = f.get(*this)) ordered[f.name] = *v;
  }
  return json::parse(ordered.dump());
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a table of keys");
  RunConfig config;
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const auto& f : fields()) {
      if (key == f.name) {
        f.set(config, key, value);
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("unknown config key '" + key + "'");
  }
  return config;
}

std::string RunConfig::to_toml() const {
  std::string out;
  for (const auto& f : fields()) {
    if (auto v = f.get(*this)) out += std::string(f.name) + " = " + format_value(*v) + "\n";
  }
  return out;
}

RunConfig RunConfig::from_toml(const std::string& text) { return from_json(parse_flat_toml(text)); }

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (path.extension() == ".json") {
    try {
      return from_json(json::parse(buffer.str()));
    } catch (const json::parse_error& e) {
      throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
  }
  return from_toml(buffer.str());
}

void RunConfig::validate() const {
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (bins < 2) throw ConfigError("bins must be at least 2");
  if (split.size() != 3) throw ConfigError("split needs three fractions (train, validation, test)");
  double total = 0.0;
  for (double f : split) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  forest().validate();
  if (!(min_support > 0.0 && min_support <= 1.0)) throw ConfigError("min_support must be in (0, 1]");
  if (max_rule_length < 1) throw ConfigError("max_rule_length must be at least 1");
  if (!(validity_alpha > 0.0 && validity_alpha < 1.0)) throw ConfigError("validity_alpha must be in (0, 1)");
  correction_from(validity_correction);
  if (top_m < 1) throw ConfigError("top_m must be at least 1");
  if (!(propensity_l2 > 0.0) || !std::isfinite(propensity_l2)) throw ConfigError("propensity_l2 must be positive");
  const std::vector<std::size_t> unit(max_rule_length, 1);
  hyperparams(unit).validate();
  search().validate();
  if (sweep_alpha.empty() || sweep_beta_scale.empty()) throw ConfigError("sweep grids must not be empty");
  for (double a : sweep_alpha) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("sweep_alpha values must be positive");
  }
  for (double b : sweep_beta_scale) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("sweep_beta_scale values must be positive");
  }
  synthetic().validate();
  if (synth_repeats < 1) throw ConfigError("synth_repeats must be at least 1");
  if (!(synth_test_fraction > 0.0 && synth_test_fraction < 1.0)) {
    throw ConfigError("synth_test_fraction must be in (0, 1)");
  }
}

ForestConfig RunConfig::forest() const {
  ForestConfig f;
  f.n_trees = n_trees;
  f.max_depth = max_depth;
  f.min_leaf = min_leaf;
  f.features_per_split = features_per_split;
  f.bootstrap = bootstrap;
  f.seed = seed;
  return f;
}

MiningConfig RunConfig::mining() const {
  MiningConfig m;
  m.forest = forest();
  m.min_support = min_support;
  m.screen.validity.alpha = validity_alpha;
  m.screen.validity.correction = correction_from(validity_correction);
  m.screen.top_m = top_m;
  m.screen.max_length = max_rule_length;
  m.screen.propensity_l2 = propensity_l2;
  return m;
}

SearchParams RunConfig::search() const {
  SearchParams p;
  p.n_iter = n_iter;
  p.t0 = t0;
  p.q_explore = q_explore;
  p.bound_c = bound_c;
  p.neighbor_score = neighbor_score_from_string(neighbor_score);
  p.seed = seed;
  return p;
}

Hyperparams RunConfig::hyperparams(std::span<const std::size_t> pool_sizes) const {
  return hyperparams(pool_sizes, alpha, beta_scale);
}

Hyperparams RunConfig::hyperparams(std::span<const std::size_t> pool_sizes, double alpha_value,
                                   double beta_value) const {
  Hyperparams h = Hyperparams::for_pool(pool_sizes, alpha_value, beta_value);
  h.prior_mean = {prior_mean};
  h.prior_variance = {prior_variance};
  return h;
}

SyntheticSpec RunConfig::synthetic() const {
  SyntheticSpec s;
  s.n = synth_n;
  s.j = synth_j;
  s.n_true_rules = synth_true_rules;
  s.pool_size_m = top_m;
  s.seed = seed;
  s.bins = bins;
  s.min_support = min_support;
  s.max_length = max_rule_length;
  return s;
}

RecoverySettings RunConfig::recovery() const {
  RecoverySettings r;
  r.mining = mining();
  r.search = search();
  r.prior_mean = {prior_mean};
  r.prior_variance = {prior_variance};
  r.test_fraction = synth_test_fraction;
  r.threads = threads;
  return r;
}

}  // namespace crs
