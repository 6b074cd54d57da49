#pragma once

// Parameter counts, information criteria, the intercept/threshold-only null
// model and repeated V-fold cross-validation.

#include <cstdint>
#include <vector>

#include "gmr3/dataset.hpp"
#include "gmr3/mm_solver.hpp"

namespace gmr3 {

/// K = (P + R - S) S + sum_{discrete p} (C_p - 2) + #numeric/binary responses
///     + sum_{ordinal r} (C_r - 1), plus one for sigma^2 when numeric responses
/// exist and `count_sigma2` is set.
int count_parameters(const VariableSchema& schema, int rank, bool count_sigma2 = true);

struct NullFit {
  Vector m;                        ///< numeric: mean; binary: logit(proportion)
  std::vector<Vector> thresholds;  ///< ordinal: logits of cumulative proportions
  double sigma2 = 1.0;             ///< pooled MLE residual variance of numeric responses
  double nll = 0.0;
  int n_parameters = 0;
};

NullFit fit_null(const Dataset& data, bool count_sigma2 = true);

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
  double r2_adjusted = 0.0;
};

/// AIC = 2L + 2K, BIC = 2L + log(N) K, R2_a = 1 - (L + K) / L_0.
InformationCriteria information_criteria(double nll, int k, Index n, double null_nll);

struct SelectionRow {
  int rank = 0;
  double nll = 0.0;
  int k = 0;
  double aic = 0.0;
  double bic = 0.0;
  double r2_adjusted = 0.0;
  bool converged = false;
};

struct SelectionReport {
  std::vector<SelectionRow> rows;
  double null_nll = 0.0;
  int chosen_aic = 0;
  int chosen_bic = 0;
  int chosen_r2 = 0;
};

SelectionReport select_rank(const Dataset& data, const std::vector<int>& ranks, const FitOptions& options = {},
                            bool count_sigma2 = true);

struct CvOptions {
  int folds = 10;    ///< V
  int repeats = 10;  ///< L
  std::uint64_t seed = 0;
  FitOptions fit;
  /// Warm-start each fold fit from the full-data fit of the same rank.
  bool warm_start = true;
  int max_fold_retries = 100;
};

struct CvCurvePoint {
  int rank = 0;
  double mean = 0.0;  ///< CV estimate: mean over folds of per-observation summed loss
  double se = 0.0;    ///< sd of the L*V fold estimates / sqrt(L*V)
  std::vector<double> fold_estimates;  ///< indexed l * V + v
};

struct CvReport {
  std::vector<CvCurvePoint> curve;
  int chosen_min = 0;
  int chosen_one_se = 0;
  std::vector<std::string> notes;
};

/// Fold labels 0..V-1 for one repeat, stratified on the response with the
/// rarest category; sizes differ by at most one.
std::vector<int> assign_folds(const Dataset& data, int folds, std::uint64_t seed);

CvReport cross_validate(const Dataset& data, const std::vector<int>& ranks, const CvOptions& options);

}  // namespace gmr3
