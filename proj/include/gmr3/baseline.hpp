#pragma once

// Separate per-response regressions on a dummy-coded design: binary logistic,
// proportional odds and Gaussian linear models, with deviances, parameter
// counts, information criteria and bootstrap standard errors for comparison
// with the reduced-rank fit.

#include <cstdint>
#include <string>
#include <vector>

#include "gmr3/dataset.hpp"
#include "gmr3/inference.hpp"
#include "gmr3/likelihood.hpp"
#include "gmr3/mm_solver.hpp"

namespace gmr3 {

struct DummyDesign {
  Matrix x;                          ///< N x (sum of slope columns), no intercept column
  std::vector<std::string> columns;  ///< "A", "PA2", "PA3", ...
};

/// Numeric predictors standardized with the population SD; each discrete
/// predictor contributes C_p - 1 indicators for categories 2..C_p.
DummyDesign dummy_design(const Dataset& data);

struct SeparateFit {
  std::string response;
  Family family = Family::Numeric;
  Vector slopes;
  double intercept = 0.0;  ///< numeric and binary models
  Vector thresholds;       ///< ordinal models: P(y <= c) = F(t_c - x'beta)
  double sigma2 = 0.0;     ///< numeric models (maximum likelihood)
  double nll = 0.0;
  int n_parameters = 0;
  int iterations = 0;
  bool converged = false;
  /// Newton did not reach the gradient tolerance or |beta| grew beyond 10,
  /// the usual sign of (quasi-)complete separation.
  bool separation = false;
  double gradient_norm = 0.0;

  double deviance() const { return 2.0 * nll; }
};

struct NewtonOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  double separation_bound = 10.0;
};

/// P(y = 1) = F(alpha + x'beta), damped Newton.
SeparateFit fit_binary_logistic(const Matrix& x, const Vector& y, const NewtonOptions& options = {});

/// P(y <= c) = F(t_c - x'beta) with log-gap thresholds, damped Newton.
SeparateFit fit_proportional_odds(const Matrix& x, const Vector& y, int n_categories,
                                  const NewtonOptions& options = {});

/// Least squares with the maximum-likelihood variance SSE / N.
SeparateFit fit_linear(const Matrix& x, const Vector& y, bool count_sigma2 = true);

struct SeparateFits {
  std::vector<SeparateFit> fits;
  std::vector<std::string> columns;
  double deviance = 0.0;
  int n_parameters = 0;

  /// Slopes as a (design columns) x R table.
  Matrix coefficient_table() const;
};

SeparateFits fit_separate(const Dataset& data, bool count_sigma2 = true, const NewtonOptions& options = {});

/// K = sum over responses of slope columns plus intercept (numeric, binary)
/// or C_r - 1 thresholds (ordinal), plus sigma^2 per numeric response.
int separate_parameter_count(const VariableSchema& schema, bool count_sigma2 = true);

struct CriteriaRow {
  std::string model;
  double deviance = 0.0;
  int k = 0;
  double aic = 0.0;
  double bic = 0.0;
};

/// AIC = deviance + 2K, BIC = deviance + log(N) K.
CriteriaRow criteria_from_deviance(const std::string& model, double deviance, int k, Index n);

struct CompareOptions {
  int replicates = 200;
  std::uint64_t seed = 0;
  FitOptions fit;
  NewtonOptions newton;
  bool count_sigma2 = true;
};

struct ComparisonReport {
  CriteriaRow separate;
  CriteriaRow reduced;
  std::vector<std::string> rows;     ///< contrast labels, shared by all tables
  std::vector<std::string> columns;  ///< response names
  Matrix separate_coefficients;
  Matrix reduced_contrasts;
  Matrix separate_se;
  Matrix reduced_se;
  int separate_failures = 0;
  int reduced_failures = 0;
  std::vector<std::string> separated;  ///< responses whose full-data fit flagged separation
};

ComparisonReport compare(const Dataset& data, const FitResult& reduced, const CompareOptions& options);

}  // namespace gmr3
