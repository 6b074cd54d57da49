#pragma once

// Optimal scaling of discrete predictors.

#include <string>
#include <vector>

#include "gmr3/dataset.hpp"

namespace gmr3 {

enum class Direction { Increasing, Decreasing };

std::string to_string(Direction d);
Direction parse_direction(const std::string& text);

/// Weighted least-squares fit constrained to be monotone in the given
/// direction (pool-adjacent-violators).
Vector weighted_monotone_regression(const Vector& values, const Vector& weights, Direction direction);

struct Quantification {
  Vector scores;  ///< one per category, in category order
  Level level = Level::Nominal;
  Direction direction = Direction::Increasing;  ///< meaningful for ordinal level only
};

/// Rescales category scores so that the frequency-weighted mean is 0 and the
/// frequency-weighted (population) variance is 1.
Vector rescale_scores(const Vector& scores, const Vector& counts);

/// Quantification update for one predictor given the least-squares target
/// Z_tilde (N x R, the working response with every other term removed) and the
/// predictor's row a_p of B V'. Nominal and binary levels take the
/// unconstrained solution; ordinal level keeps the better-fitting of the two
/// monotone projections. The result is rescaled to mean 0, variance 1.
Quantification update_quantification(const Matrix& z_tilde, const Vector& a_p,
                                     const IndicatorMatrix& g_p, Level level);

/// Same update from the per-category unconstrained solution (G'G)^-1 G' Z_tilde a / a'a.
Quantification quantify(const Vector& unconstrained, const Vector& counts, Level level);

/// How one predictor column is turned into a column of Phi.
struct PredictorTransform {
  std::string name;
  Level level = Level::Numeric;
  double mean = 0.0;  ///< numeric only
  double sd = 1.0;    ///< numeric only
  Quantification quantification;  ///< discrete only
  std::vector<std::string> categories;  ///< discrete only

  bool is_numeric() const { return level == Level::Numeric; }
};

struct ScaledPredictors {
  Matrix phi;  ///< N x P
  std::vector<PredictorTransform> transforms;
  /// Per predictor: 1-based codes (discrete) and category counts on the training data.
  std::vector<Vector> codes;
  std::vector<Vector> counts;
};

/// Starting scaling: numeric predictors standardized, discrete predictors
/// quantified by their standardized integer codes.
ScaledPredictors initial_scaling(const Dataset& data);

/// Scaling with given discrete scores (renormalized on this data) and
/// numeric statistics recomputed on this data.
ScaledPredictors scaling_with_scores(const Dataset& data, const std::vector<PredictorTransform>& start);

/// Applies a fitted transform to a raw column (numeric values or 1-based codes).
/// Code 0 marks an unknown label: an error unless `neutral_unknown`, which maps it to 0.
Vector apply_scaling(const Vector& raw, const PredictorTransform& transform, bool neutral_unknown = false);

/// Phi for new data using training transforms, in schema predictor order.
Matrix apply_scaling(const Dataset& data, const std::vector<PredictorTransform>& transforms,
                     bool neutral_unknown = false);

}  // namespace gmr3
