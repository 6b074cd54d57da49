#pragma once

// Typed tabular data: schema, validated columns, response encodings and
// predictor indicator matrices.

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gmr3 {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class Role { Predictor, Response };
enum class Level { Numeric, Binary, Nominal, Ordinal };

std::string to_string(Role role);
std::string to_string(Level level);
Role parse_role(const std::string& text);
Level parse_level(const std::string& text);

struct VariableSpec {
  std::string name;
  Role role = Role::Predictor;
  Level level = Level::Numeric;
  /// Ordered labels; empty for numeric variables. Binary variables default to {"0","1"}.
  std::vector<std::string> categories;

  bool is_discrete() const { return level != Level::Numeric; }
  int n_categories() const { return static_cast<int>(categories.size()); }
};

class VariableSchema {
 public:
  VariableSchema() = default;
  /// Validates names, category lists and binary-response coding.
  explicit VariableSchema(std::vector<VariableSpec> variables);

  const std::vector<VariableSpec>& variables() const { return variables_; }
  const VariableSpec& operator[](std::size_t j) const { return variables_[j]; }
  std::size_t size() const { return variables_.size(); }
  /// Position of `name`, or throws DataError.
  std::size_t index_of(const std::string& name) const;

  /// Positions of predictors / responses in schema order.
  std::vector<std::size_t> predictors() const;
  std::vector<std::size_t> responses() const;

  nlohmann::json to_json() const;
  static VariableSchema from_json(const nlohmann::json& j);
  static VariableSchema load(const std::filesystem::path& path);
  /// FNV-1a digest of the canonical JSON form, as 16 hex digits.
  std::string digest() const;

 private:
  std::vector<VariableSpec> variables_;
};

/// Unknown labels either fail the load or are coded 0 (for prediction input).
enum class UnknownLabels { Reject, MarkUnknown };

struct LoadOptions {
  /// Require every category of every discrete variable to be observed.
  bool require_all_categories = true;
  /// Response columns may be absent (prediction input).
  bool responses_optional = false;
  UnknownLabels unknown_labels = UnknownLabels::Reject;
};

/// Immutable validated data. Numeric columns hold raw values, binary
/// responses hold 0/1 and every other discrete column holds codes 1..C
/// (0 = unknown label, only under UnknownLabels::MarkUnknown).
class Dataset {
 public:
  Dataset(VariableSchema schema, std::vector<Vector> columns, std::vector<bool> present = {});

  const VariableSchema& schema() const { return schema_; }
  Index n() const { return n_; }
  const Vector& column(std::size_t j) const { return columns_[j]; }
  const Vector& column(const std::string& name) const;
  bool has_column(std::size_t j) const { return present_[j]; }

  /// Integer code of a discrete column at row i.
  int code(std::size_t j, Index i) const { return static_cast<int>(columns_[j][i]); }

  /// Rows in the given order (repetition allowed).
  Dataset subset(std::span<const Index> rows) const;

  /// Writes a CSV with labels for discrete columns; reloads to identical columns.
  void write_csv(std::ostream& out) const;

 private:
  VariableSchema schema_;
  std::vector<Vector> columns_;
  std::vector<bool> present_;
  Index n_ = 0;
};

Dataset load_dataset(const std::filesystem::path& csv_path, const VariableSchema& schema,
                     const LoadOptions& options = {});
Dataset load_dataset(std::istream& csv, const VariableSchema& schema,
                     const LoadOptions& options = {});

/// Signed binary codes q = 2y - 1 and one-hot ordinal indicators.
struct ResponseEncoding {
  /// N x R; entries at non-binary positions are 0.
  Matrix q;
  /// Per response: N x C one-hot matrix for ordinal responses, empty otherwise.
  std::vector<Matrix> g;
};

ResponseEncoding encode_responses(const Dataset& data);

struct IndicatorMatrix {
  Matrix g;  ///< N x C, one-hot rows
  Vector category_counts;
};

/// One-hot coding of a discrete predictor; every category must be occupied.
IndicatorMatrix build_indicator(const Dataset& data, const std::string& var);
/// Same, from raw 1-based codes.
IndicatorMatrix build_indicator(const Vector& codes, int n_categories);

struct Standardized {
  Vector values;
  double mean = 0.0;
  double sd = 1.0;
};

/// (x - mean) / sd with the population (divide by N) standard deviation.
Standardized standardize(const Vector& values);

/// The shape used throughout the examples and tests: A numeric, G binary,
/// PA/U/E ordinal predictors; T/FE binary and CI/MW/FS/DI/RE four-category
/// ordinal responses.
VariableSchema eurobarometer_schema();

}  // namespace gmr3
