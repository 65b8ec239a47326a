#include "crs/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "crs/errors.hpp"
#include "crs/log.hpp"

namespace crs {
namespace {

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          field.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

bool is_missing(const std::string& value) {
  return value.empty() || value == "NA" || value == "NaN" || value == "nan" || value == "null";
}

bool parse_double(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

std::uint8_t parse_binary(const std::string& text, const std::string& column, std::size_t row) {
  double value = 0.0;
  if (!parse_double(text, value) || (value != 0.0 && value != 1.0)) {
    throw DataError("column '" + column + "' row " + std::to_string(row) + ": value '" + text +
                    "' is not binary (expected 0 or 1)");
  }
  return static_cast<std::uint8_t>(value);
}

std::string format_number(double value) {
  std::ostringstream os;
  os.precision(6);
  os << value;
  return os.str();
}

}  // namespace

Schema Schema::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema file is not valid JSON: " + std::string(e.what()));
  }
  Schema schema;
  try {
    schema.treatment = j.at("treatment").get<std::string>();
    schema.outcome = j.at("outcome").get<std::string>();
    schema.numeric = j.value("numeric", std::vector<std::string>{});
    schema.categorical = j.value("categorical", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema file is missing a field: " + std::string(e.what()));
  }
  return schema;
}

RawTable load_csv(const std::filesystem::path& path, const Schema& schema) {
  if (schema.treatment.empty() || schema.outcome.empty()) {
    throw ConfigError("schema must name a treatment and an outcome column");
  }
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file: " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError("data file has no header row: " + path.string());
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM

  RawTable table;
  for (auto& name : parse_csv_line(line)) table.column_names.push_back(trim(name));

  auto column_index = [&](const std::string& name) {
    auto it = std::find(table.column_names.begin(), table.column_names.end(), name);
    if (it == table.column_names.end()) throw ConfigError("schema names unknown column '" + name + "'");
    return static_cast<std::size_t>(it - table.column_names.begin());
  };
  const std::size_t treatment_col = column_index(schema.treatment);
  const std::size_t outcome_col = column_index(schema.outcome);

  struct Source {
    std::size_t column;
    AttributeKind kind;
  };
  std::vector<Source> sources;
  for (const auto& name : schema.numeric) {
    sources.push_back({column_index(name), AttributeKind::numeric});
    table.attributes.push_back({name, AttributeKind::numeric, {}, {}});
  }
  for (const auto& name : schema.categorical) {
    sources.push_back({column_index(name), AttributeKind::categorical});
    table.attributes.push_back({name, AttributeKind::categorical, {}, {}});
  }

  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = parse_csv_line(line);
    if (fields.size() != table.column_names.size()) {
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(table.column_names.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    for (auto& f : fields) f = trim(f);
    table.treatment.push_back(parse_binary(fields[treatment_col], schema.treatment, row));
    table.outcome.push_back(parse_binary(fields[outcome_col], schema.outcome, row));
    for (std::size_t a = 0; a < sources.size(); ++a) {
      const std::string& value = fields[sources[a].column];
      auto& attr = table.attributes[a];
      if (is_missing(value)) {
        throw DataError("column '" + attr.name + "' row " + std::to_string(row) + ": missing value");
      }
      if (attr.kind == AttributeKind::numeric) {
        double parsed = 0.0;
        if (!parse_double(value, parsed)) {
          throw DataError("column '" + attr.name + "' row " + std::to_string(row) + ": '" + value +
                          "' is not numeric");
        }
        attr.numeric.push_back(parsed);
      } else {
        attr.categorical.push_back(value);
      }
    }
    ++row;
  }
  if (row == 0) throw DataError("no rows");
  table.n_rows = row;
  return table;
}

bool Condition::matches(double value) const {
  if (kind != ConditionKind::interval) return false;
  return value >= lower && (upper_closed ? value <= upper : value < upper);
}

bool Condition::matches(const std::string& value) const {
  switch (kind) {
    case ConditionKind::equals:
      return value == category;
    case ConditionKind::not_equals:
      return value != category;
    case ConditionKind::interval:
      return false;
  }
  return false;
}

std::string Condition::describe(const std::string& attribute_name) const {
  switch (kind) {
    case ConditionKind::equals:
      return attribute_name + " == " + category;
    case ConditionKind::not_equals:
      return attribute_name + " != " + category;
    case ConditionKind::interval:
      return attribute_name + " in [" + format_number(lower) + ", " + format_number(upper) +
             (upper_closed ? "]" : ")");
  }
  return attribute_name;
}

Dataset Dataset::create(const Eigen::MatrixXd& conditions, std::vector<std::uint8_t> treatment,
                        std::vector<std::uint8_t> outcome, std::vector<Condition> dictionary,
                        std::vector<std::string> attribute_names) {
  const auto n = static_cast<std::size_t>(conditions.rows());
  const auto j = static_cast<std::size_t>(conditions.cols());
  if (treatment.size() != n || outcome.size() != n) {
    throw DataError("treatment/outcome length does not match the number of rows");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (treatment[i] > 1 || outcome[i] > 1) {
      throw DataError("row " + std::to_string(i) + ": treatment and outcome must be 0 or 1");
    }
  }
  if (dictionary.empty()) {
    // Generic names for matrices built directly (tests, synthetic data).
    for (std::size_t c = 0; c < j; ++c) {
      Condition cond;
      cond.attribute = c;
      cond.kind = ConditionKind::equals;
      cond.category = "1";
      dictionary.push_back(cond);
      attribute_names.push_back("x" + std::to_string(c));
    }
  }
  if (dictionary.size() != j) throw DataError("condition dictionary size does not match columns");

  Dataset ds;
  ds.x_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j + 1));
  ds.column_bits_.assign(j, Bitset(n));
  for (std::size_t c = 0; c < j; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      const double value = conditions(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      if (value != 0.0 && value != 1.0) {
        throw DataError("condition column " + std::to_string(c) + " row " + std::to_string(i) +
                        " is not binary");
      }
      ds.x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = value;
      if (value == 1.0) ds.column_bits_[c].set(i);
    }
  }
  ds.x_.col(static_cast<Eigen::Index>(j)).setOnes();
  ds.treated_ = Bitset(n);
  ds.positive_ = Bitset(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (treatment[i]) ds.treated_.set(i);
    if (outcome[i]) ds.positive_.set(i);
  }
  ds.treatment_ = std::move(treatment);
  ds.outcome_ = std::move(outcome);
  ds.conditions_ = std::move(dictionary);
  ds.attribute_names_ = std::move(attribute_names);
  return ds;
}

std::string Dataset::describe_column(std::size_t column) const {
  if (column == intercept_column()) return "(intercept)";
  const Condition& cond = conditions_.at(column);
  const std::string& name = cond.attribute < attribute_names_.size()
                                ? attribute_names_[cond.attribute]
                                : std::string("attr") + std::to_string(cond.attribute);
  return cond.describe(name);
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  const auto j = static_cast<Eigen::Index>(n_conditions());
  Eigen::MatrixXd cols(static_cast<Eigen::Index>(rows.size()), j);
  std::vector<std::uint8_t> t(rows.size());
  std::vector<std::uint8_t> y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = static_cast<Eigen::Index>(rows[r]);
    if (rows[r] >= n_rows()) throw std::out_of_range("row index out of range");
    cols.row(static_cast<Eigen::Index>(r)) = x_.row(src).head(j);
    t[r] = treatment_[rows[r]];
    y[r] = outcome_[rows[r]];
  }
  return create(cols, std::move(t), std::move(y), conditions_, attribute_names_);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Dataset binarize(const RawTable& table, std::size_t bins_per_numeric) {
  if (bins_per_numeric < 2) throw ConfigError("bins_per_numeric must be at least 2");
  const std::size_t n = table.n_rows;

  std::vector<std::vector<double>> columns;
  std::vector<Condition> dictionary;
  std::vector<std::string> names;

  auto push_column = [&](const Condition& cond, std::vector<double> column) {
    const double ones = std::accumulate(column.begin(), column.end(), 0.0);
    if (ones == 0.0 || ones == static_cast<double>(n)) return;  // constant
    dictionary.push_back(cond);
    columns.push_back(std::move(column));
  };

  for (std::size_t a = 0; a < table.attributes.size(); ++a) {
    const RawAttribute& attr = table.attributes[a];
    names.push_back(attr.name);
    if (attr.kind == AttributeKind::numeric) {
      std::vector<double> sorted = attr.numeric;
      std::sort(sorted.begin(), sorted.end());
      const double lo = sorted.front();
      const double hi = sorted.back();
      if (lo == hi) {
        log_warning("attribute '" + attr.name + "' has a single distinct value; dropped");
        continue;
      }
      std::vector<double> cuts;
      for (std::size_t k = 1; k < bins_per_numeric; ++k) {
        const double c = quantile_sorted(sorted, static_cast<double>(k) / static_cast<double>(bins_per_numeric));
        if (c > lo && c < hi && (cuts.empty() || c > cuts.back())) cuts.push_back(c);
      }
      if (cuts.empty()) {
        // Heavily tied column: split off the smallest value.
        cuts.push_back(*std::upper_bound(sorted.begin(), sorted.end(), lo));
      }
      std::vector<double> edges{lo};
      edges.insert(edges.end(), cuts.begin(), cuts.end());
      edges.push_back(hi);
      for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
        Condition cond;
        cond.attribute = a;
        cond.kind = ConditionKind::interval;
        cond.lower = edges[b];
        cond.upper = edges[b + 1];
        cond.upper_closed = (b + 2 == edges.size());
        std::vector<double> column(n);
        for (std::size_t i = 0; i < n; ++i) column[i] = cond.matches(attr.numeric[i]) ? 1.0 : 0.0;
        push_column(cond, std::move(column));
      }
    } else {
      std::set<std::string> levels(attr.categorical.begin(), attr.categorical.end());
      if (levels.size() < 2) {
        log_warning("attribute '" + attr.name + "' has a single distinct value; dropped");
        continue;
      }
      std::vector<ConditionKind> kinds{ConditionKind::equals};
      if (levels.size() > 2) kinds.push_back(ConditionKind::not_equals);
      for (auto kind : kinds) {
        for (const auto& level : levels) {
          Condition cond;
          cond.attribute = a;
          cond.kind = kind;
          cond.category = level;
          std::vector<double> column(n);
          for (std::size_t i = 0; i < n; ++i) column[i] = cond.matches(attr.categorical[i]) ? 1.0 : 0.0;
          push_column(cond, std::move(column));
        }
      }
    }
  }

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    x.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(columns[c].data(), static_cast<Eigen::Index>(n));
  }
  return Dataset::create(x, table.treatment, table.outcome, std::move(dictionary), std::move(names));
}

std::vector<std::vector<std::size_t>> split_indices(std::size_t n, std::span<const double> fractions,
                                                    std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("split needs at least one fraction");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");

  // Largest-remainder rounding; ties go to the earlier part.
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    const double share = fractions[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(share + 1e-9));
    assigned += sizes[k];
    remainders.emplace_back(share - static_cast<double>(sizes[k]), k);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first + 1e-12; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++sizes[remainders[r % remainders.size()].second];

  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] == 0) throw DataError("split part " + std::to_string(k) + " would be empty");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<std::size_t>> parts;
  std::size_t offset = 0;
  for (auto size : sizes) {
    std::vector<std::size_t> part(order.begin() + static_cast<std::ptrdiff_t>(offset),
                                  order.begin() + static_cast<std::ptrdiff_t>(offset + size));
    std::sort(part.begin(), part.end());
    parts.push_back(std::move(part));
    offset += size;
  }
  return parts;
}

std::vector<Dataset> split(const Dataset& ds, std::span<const double> fractions, std::uint64_t seed) {
  std::vector<Dataset> out;
  for (const auto& rows : split_indices(ds.n_rows(), fractions, seed)) out.push_back(ds.subset(rows));
  return out;
}

}  // namespace crs
