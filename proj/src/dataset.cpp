#include "gmr3/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gmr3/csv.hpp"
#include "gmr3/error.hpp"

namespace gmr3 {

std::string to_string(Role role) { return role == Role::Predictor ? "predictor" : "response"; }

std::string to_string(Level level) {
  switch (level) {
    case Level::Numeric: return "numeric";
    case Level::Binary: return "binary";
    case Level::Nominal: return "nominal";
    case Level::Ordinal: return "ordinal";
  }
  return "unknown";
}

Role parse_role(const std::string& text) {
  if (text == "predictor") return Role::Predictor;
  if (text == "response") return Role::Response;
  throw DataError("unknown role '" + text + "' (expected predictor|response)");
}

Level parse_level(const std::string& text) {
  if (text == "numeric") return Level::Numeric;
  if (text == "binary") return Level::Binary;
  if (text == "nominal") return Level::Nominal;
  if (text == "ordinal") return Level::Ordinal;
  throw DataError("unknown level '" + text + "' (expected numeric|binary|nominal|ordinal)");
}

VariableSchema::VariableSchema(std::vector<VariableSpec> variables)
    : variables_(std::move(variables)) {
  std::set<std::string> names;
  for (auto& v : variables_) {
    if (v.name.empty()) throw DataError("schema: variable with empty name");
    if (!names.insert(v.name).second) throw DataError("schema: duplicate variable '" + v.name + "'");
    if (v.level == Level::Numeric) {
      if (!v.categories.empty())
        throw DataError("schema: numeric variable '" + v.name + "' must not list categories");
      continue;
    }
    if (v.level == Level::Binary && v.categories.empty()) v.categories = {"0", "1"};
    if (v.categories.size() < 2)
      throw DataError("schema: variable '" + v.name + "' needs at least 2 categories");
    if (v.level == Level::Binary && v.categories.size() != 2)
      throw DataError("schema: binary variable '" + v.name + "' must have exactly 2 categories");
    if (v.level == Level::Binary && v.role == Role::Response &&
        (v.categories[0] != "0" || v.categories[1] != "1"))
      throw DataError("schema: binary response '" + v.name + "' must be coded 0/1");
    if (v.level == Level::Nominal && v.role == Role::Response)
      throw DataError("schema: nominal responses are not supported ('" + v.name + "')");
    std::set<std::string> labels(v.categories.begin(), v.categories.end());
    if (labels.size() != v.categories.size())
      throw DataError("schema: duplicate category label in '" + v.name + "'");
  }
}

std::size_t VariableSchema::index_of(const std::string& name) const {
  for (std::size_t j = 0; j < variables_.size(); ++j)
    if (variables_[j].name == name) return j;
  throw DataError("schema has no variable '" + name + "'");
}

std::vector<std::size_t> VariableSchema::predictors() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < variables_.size(); ++j)
    if (variables_[j].role == Role::Predictor) out.push_back(j);
  return out;
}

std::vector<std::size_t> VariableSchema::responses() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < variables_.size(); ++j)
    if (variables_[j].role == Role::Response) out.push_back(j);
  return out;
}

nlohmann::json VariableSchema::to_json() const {
  nlohmann::json vars = nlohmann::json::array();
  for (const auto& v : variables_) {
    nlohmann::json e{{"name", v.name}, {"role", to_string(v.role)}, {"level", to_string(v.level)}};
    if (v.is_discrete()) e["categories"] = v.categories;
    vars.push_back(std::move(e));
  }
  return {{"variables", vars}};
}

VariableSchema VariableSchema::from_json(const nlohmann::json& j) {
  if (!j.contains("variables") || !j["variables"].is_array())
    throw DataError("schema: top-level 'variables' array required");
  std::vector<VariableSpec> vars;
  for (const auto& e : j["variables"]) {
    VariableSpec v;
    try {
      v.name = e.at("name").get<std::string>();
      v.role = parse_role(e.at("role").get<std::string>());
      v.level = parse_level(e.at("level").get<std::string>());
      if (e.contains("categories")) {
        for (const auto& c : e["categories"])
          v.categories.push_back(c.is_string() ? c.get<std::string>() : c.dump());
      }
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(std::string("schema: ") + ex.what());
    }
    vars.push_back(std::move(v));
  }
  return VariableSchema(std::move(vars));
}

VariableSchema VariableSchema::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("schema " + path.string() + ": " + ex.what());
  }
  return from_json(j);
}

std::string VariableSchema::digest() const {
  std::string text = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Dataset::Dataset(VariableSchema schema, std::vector<Vector> columns, std::vector<bool> present)
    : schema_(std::move(schema)), columns_(std::move(columns)), present_(std::move(present)) {
  if (columns_.size() != schema_.size())
    throw ContractError("Dataset: column count does not match schema");
  if (present_.empty()) present_.assign(columns_.size(), true);
  n_ = -1;
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (!present_[j]) continue;
    if (n_ < 0) n_ = columns_[j].size();
    if (columns_[j].size() != n_) throw ContractError("Dataset: columns differ in length");
  }
  if (n_ < 0) n_ = 0;
  for (std::size_t j = 0; j < columns_.size(); ++j)
    if (!present_[j]) columns_[j] = Vector::Zero(n_);
}

const Vector& Dataset::column(const std::string& name) const {
  return columns_[schema_.index_of(name)];
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  std::vector<Vector> cols(columns_.size());
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    cols[j].resize(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) cols[j][static_cast<Index>(i)] = columns_[j][rows[i]];
  }
  return Dataset(schema_, std::move(cols), present_);
}

namespace {

bool binary_response(const VariableSpec& v) {
  return v.level == Level::Binary && v.role == Role::Response;
}

std::string format_number(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

void Dataset::write_csv(std::ostream& out) const {
  csv::Row header;
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    if (!present_[j]) continue;
    header.push_back(schema_[j].name);
    cols.push_back(j);
  }
  csv::write_row(out, header);
  for (Index i = 0; i < n_; ++i) {
    csv::Row row;
    for (std::size_t j : cols) {
      const auto& v = schema_[j];
      double x = columns_[j][i];
      if (v.level == Level::Numeric) {
        row.push_back(format_number(x));
      } else if (binary_response(v)) {
        row.push_back(v.categories[static_cast<std::size_t>(x)]);
      } else {
        int c = static_cast<int>(x);
        row.push_back(c >= 1 ? v.categories[static_cast<std::size_t>(c - 1)] : std::string("?"));
      }
    }
    csv::write_row(out, row);
  }
}

Dataset load_dataset(std::istream& in, const VariableSchema& schema, const LoadOptions& options) {
  csv::Table table = csv::read(in);
  std::map<std::string, std::size_t> position;
  for (std::size_t k = 0; k < table.header.size(); ++k) position[table.header[k]] = k;

  const Index n = static_cast<Index>(table.rows.size());
  std::vector<Vector> columns(schema.size());
  std::vector<bool> present(schema.size(), true);

  for (std::size_t j = 0; j < schema.size(); ++j) {
    const auto& v = schema[j];
    auto it = position.find(v.name);
    if (it == position.end()) {
      if (options.responses_optional && v.role == Role::Response) {
        present[j] = false;
        columns[j] = Vector::Zero(n);
        continue;
      }
      throw DataError("CSV header lacks column '" + v.name + "'");
    }
    const std::size_t k = it->second;
    Vector col(n);
    std::map<std::string, int> lookup;
    for (int c = 0; c < v.n_categories(); ++c)
      lookup[v.categories[static_cast<std::size_t>(c)]] = c + 1;

    for (Index i = 0; i < n; ++i) {
      const std::string& cell = table.rows[static_cast<std::size_t>(i)][k];
      auto where = [&] {
        return " (row " + std::to_string(i + 1) + ", column '" + v.name + "')";
      };
      if (cell.empty() || cell == "NA" || cell == "NaN")
        throw DataError("missing value" + where());
      if (v.level == Level::Numeric) {
        double x = 0.0;
        const char* first = cell.data();
        const char* last = cell.data() + cell.size();
        auto [ptr, ec] = std::from_chars(first, last, x);
        if (ec != std::errc() || ptr != last || !std::isfinite(x))
          throw DataError("cannot parse '" + cell + "' as a number" + where());
        col[i] = x;
        continue;
      }
      auto found = lookup.find(cell);
      if (found == lookup.end()) {
        if (options.unknown_labels == UnknownLabels::MarkUnknown && !binary_response(v)) {
          col[i] = 0.0;
          continue;
        }
        throw DataError("label '" + cell + "' is not a category of '" + v.name + "'" + where());
      }
      col[i] = binary_response(v) ? found->second - 1 : found->second;
    }

    if (v.is_discrete() && options.require_all_categories) {
      std::vector<int> counts(static_cast<std::size_t>(v.n_categories()), 0);
      for (Index i = 0; i < n; ++i) {
        int c = static_cast<int>(col[i]) + (binary_response(v) ? 1 : 0);
        if (c >= 1) ++counts[static_cast<std::size_t>(c - 1)];
      }
      std::string empty;
      for (std::size_t c = 0; c < counts.size(); ++c)
        if (counts[c] == 0) empty += (empty.empty() ? "" : ", ") + std::string("'") + v.categories[c] + "'";
      if (!empty.empty())
        throw DataError("variable '" + v.name + "' has empty categories: " + empty);
    }
    columns[j] = std::move(col);
  }
  return Dataset(schema, std::move(columns), std::move(present));
}

Dataset load_dataset(const std::filesystem::path& csv_path, const VariableSchema& schema,
                     const LoadOptions& options) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw DataError("cannot open " + csv_path.string());
  return load_dataset(in, schema, options);
}

ResponseEncoding encode_responses(const Dataset& data) {
  const auto resp = data.schema().responses();
  ResponseEncoding enc;
  enc.q = Matrix::Zero(data.n(), static_cast<Index>(resp.size()));
  enc.g.resize(resp.size());
  for (std::size_t r = 0; r < resp.size(); ++r) {
    const auto& v = data.schema()[resp[r]];
    const Vector& y = data.column(resp[r]);
    if (v.level == Level::Binary) {
      enc.q.col(static_cast<Index>(r)) = (2.0 * y.array() - 1.0).matrix();
    } else if (v.level == Level::Ordinal) {
      enc.g[r] = build_indicator(y, v.n_categories()).g;
    }
  }
  return enc;
}

IndicatorMatrix build_indicator(const Vector& codes, int n_categories) {
  IndicatorMatrix out;
  out.g = Matrix::Zero(codes.size(), n_categories);
  out.category_counts = Vector::Zero(n_categories);
  for (Index i = 0; i < codes.size(); ++i) {
    int c = static_cast<int>(codes[i]);
    if (c < 1 || c > n_categories)
      throw ContractError("build_indicator: code " + std::to_string(c) + " out of range");
    out.g(i, c - 1) = 1.0;
    out.category_counts[c - 1] += 1.0;
  }
  std::string empty;
  for (int c = 0; c < n_categories; ++c)
    if (out.category_counts[c] == 0.0) empty += (empty.empty() ? "" : ", ") + std::to_string(c + 1);
  if (!empty.empty()) throw DataError("indicator matrix has empty categories: " + empty);
  return out;
}

IndicatorMatrix build_indicator(const Dataset& data, const std::string& var) {
  const std::size_t j = data.schema().index_of(var);
  const auto& v = data.schema()[j];
  if (!v.is_discrete()) throw ContractError("build_indicator: '" + var + "' is numeric");
  if (v.role != Role::Predictor)
    throw ContractError("build_indicator: '" + var + "' is not a predictor");
  try {
    return build_indicator(data.column(j), v.n_categories());
  } catch (const DataError& e) {
    throw DataError("'" + var + "': " + e.what());
  }
}

Standardized standardize(const Vector& values) {
  const Index n = values.size();
  if (n < 2) throw DataError("standardize: need at least 2 values");
  Standardized out;
  out.mean = values.mean();
  double ss = (values.array() - out.mean).square().sum() / static_cast<double>(n);
  out.sd = std::sqrt(ss);
  if (!(out.sd > 1e-14 * std::max(1.0, std::abs(out.mean))))
    throw DataError("standardize: constant column");
  out.values = ((values.array() - out.mean) / out.sd).matrix();
  return out;
}

VariableSchema eurobarometer_schema() {
  const std::vector<std::string> agree{"SD", "D", "A", "SA"};
  std::vector<VariableSpec> v{
      {"A", Role::Predictor, Level::Numeric, {}},
      {"PA", Role::Predictor, Level::Ordinal, {"Left", "Center", "Right"}},
      {"G", Role::Predictor, Level::Binary, {"Male", "Female"}},
      {"U", Role::Predictor, Level::Ordinal, {"Rural", "Town", "City"}},
      {"E", Role::Predictor, Level::Ordinal,
       {"PrePrimary", "Primary", "LowSecondary", "UpSecondary", "PostSecondary", "Tertiary",
        "Bachelor", "Master", "Doctorate"}},
      {"T", Role::Response, Level::Binary, {"0", "1"}},
      {"FE", Role::Response, Level::Binary, {"0", "1"}},
      {"CI", Role::Response, Level::Ordinal, agree},
      {"MW", Role::Response, Level::Ordinal, agree},
      {"FS", Role::Response, Level::Ordinal, agree},
      {"DI", Role::Response, Level::Ordinal, agree},
      {"RE", Role::Response, Level::Ordinal, agree},
  };
  return VariableSchema(std::move(v));
}

}  // namespace gmr3
