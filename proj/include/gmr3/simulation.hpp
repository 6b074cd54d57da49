#pragma once

// Synthetic data with known rank-S structure and the parameter-recovery study.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "gmr3/dataset.hpp"
#include "gmr3/mm_solver.hpp"
#include "gmr3/rng.hpp"

namespace gmr3 {

enum class Scenario {
  MixedNumericBinary,  ///< numeric predictors; half numeric, half binary responses
  OrdinalPredictors,   ///< quintile-coded ordinal predictors; numeric and binary responses
  BinaryOrdinal,       ///< numeric predictors; half binary, half ordinal responses (r1)
  NumericOrdinal,      ///< numeric predictors; half numeric, half ordinal responses (r2)
};

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& text);
std::vector<Scenario> all_scenarios();

struct SimConfig {
  Scenario scenario = Scenario::MixedNumericBinary;
  Index n = 500;
  int p = 8;
  int r = 8;
  int s = 2;
};

struct SimTruth {
  Matrix b;  ///< P x S with orthonormal columns
  Matrix v;  ///< R x S, entries U(-1, 1)
  Vector m;
  std::vector<Vector> thresholds;
  /// True category scores of discrete predictors (empty for numeric ones).
  std::vector<Vector> scores;

  Matrix coefficients() const { return b * v.transpose(); }
};

struct SimData {
  Dataset data;
  SimTruth truth;
};

/// Ordinal thresholds used for every generated ordinal response.
Vector simulation_thresholds();

/// One response column drawn at canonical values theta: Normal(theta, 1),
/// Bernoulli(F(theta)) as 0/1, or ordinal codes 1..C at `thresholds`.
Vector draw_response(Family family, const Vector& theta, const Vector& thresholds, Rng& rng);

SimData generate(const SimConfig& config, std::uint64_t seed);

/// Survey-shaped data on the eurobarometer_schema() variables (numeric age,
/// ordinal/binary demographics, two binary and five 4-category ordinal
/// responses) with rank-2 structure. `signal` scales B.
SimData generate_survey(Index n, std::uint64_t seed, double signal = 1.0);

/// sqrt(mean((a - b)^2)).
double rmse(const Matrix& truth, const Matrix& estimate);

/// True when no element of the trace exceeds its predecessor by more than `slack`.
bool monotone_descent(const std::vector<double>& trace, double slack = 1e-10);

struct StudyRow {
  Scenario scenario{};
  Index n = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  double rmse = 0.0;
  int iterations = 0;
  bool converged = false;
  bool monotone = false;
  std::string error;  ///< non-empty when the replication failed
};

/// Replications of generate -> fit -> rmse for every configuration, ordered by
/// (configuration, rep). Failed replications are kept with `error` set.
std::vector<StudyRow> run_study(const std::vector<SimConfig>& configs, int replications, std::uint64_t seed,
                                const FitOptions& options = {});

void write_study_csv(std::ostream& out, const std::vector<StudyRow>& rows);

/// Median RMSE of successful rows matching the scenario and N.
double median_rmse(const std::vector<StudyRow>& rows, Scenario scenario, Index n);

}  // namespace gmr3
