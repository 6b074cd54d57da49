#pragma once

// Balanced pairs bootstrap with Procrustes alignment of replicates, confidence
// regions for predictor weights, implied coefficients, category contrasts and
// bootstrap standard errors.

#include <cstdint>
#include <string>
#include <vector>

#include "gmr3/dataset.hpp"
#include "gmr3/mm_solver.hpp"

namespace gmr3 {

/// B_total index vectors of length N; together they contain every index
/// exactly B_total times.
std::vector<std::vector<Index>> balanced_bootstrap_indices(Index n, int b_total, std::uint64_t seed);

/// Orthogonal T minimizing ||V_cand T - V_ref||^2.
Matrix procrustes_rotation(const Matrix& v_ref, const Matrix& v_cand);

/// Applies the Procrustes rotation to both B and V; BV' is unchanged.
Identified align_replicate(const Identified& reference, const Identified& candidate);

/// Full alignment of a refit: sign of every discrete quantification matched
/// to the reference (flipping the matching row of B), then Procrustes on V.
ModelParams align_params(const ModelParams& reference, const ModelParams& candidate);

struct BootstrapOptions {
  int replicates = 1000;  ///< B_total
  std::uint64_t seed = 0;
  FitOptions fit;
  double max_failure_rate = 0.05;
};

struct BootstrapReplicates {
  std::vector<ModelParams> params;          ///< aligned, successful replicates
  std::vector<int> replicate_ids;           ///< position of each successful replicate
  std::vector<std::vector<Index>> indices;  ///< every replicate's row multiset
  std::vector<std::string> failures;        ///< one entry per dropped replicate
  std::uint64_t seed = 0;
};

BootstrapReplicates run_bootstrap(const Dataset& data, const FitResult& reference, const BootstrapOptions& options);

/// Same as run_bootstrap with caller-supplied row multisets.
BootstrapReplicates run_bootstrap(const Dataset& data, const FitResult& reference,
                                  std::vector<std::vector<Index>> indices, const BootstrapOptions& options);

struct ConfidenceRegion {
  Vector center;
  Matrix covariance;
  double level = 0.95;
  double quantile = 0.0;  ///< chi-square quantile used for the squared distance
  double distance2 = 0.0;  ///< squared Mahalanobis distance of the origin
  bool degenerate = false;  ///< covariance singular; tested on the principal marginal
  bool contains_origin = false;
};

/// Chi-square quantile with `df` degrees of freedom.
double chi_square_quantile(double p, int df);

/// Region {x : (x - c)' Sigma^-1 (x - c) <= chi2_S(level)} from K x S draws.
/// S = 2 gives the confidence ellipse.
ConfidenceRegion confidence_region(const Matrix& points, double level = 0.95);

/// K x S stack of row `predictor` of B across replicates.
Matrix weight_draws(const BootstrapReplicates& reps, Index predictor);

Matrix implied_coefficients(const Matrix& b, const Matrix& v);

struct ContrastTable {
  std::vector<std::string> rows;     ///< "A", "PA2", "E9", ...
  std::vector<std::string> columns;  ///< response names
  Matrix values;
};

/// Rows (phi_p(c) - phi_p(1)) b_p'V' for c = 2..C_p of each discrete
/// predictor, and b_p'V' for numeric predictors.
ContrastTable category_contrasts(const ModelParams& params);

/// Elementwise standard deviation across draws with the K - 1 divisor.
Matrix bootstrap_se(const std::vector<Matrix>& draws);

}  // namespace gmr3
