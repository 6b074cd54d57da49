#pragma once

// Per-family negative log-likelihood, scores and the quadratic majorization
// that turns each MM step into a least-squares problem.

#include <string>
#include <vector>

#include "gmr3/dataset.hpp"

namespace gmr3 {

enum class Family { Numeric, Binary, Ordinal };

/// Lower bound on category probabilities inside logarithms.
inline constexpr double kProbFloor = 1e-12;
/// Below this residual variance the working response barely moves.
inline constexpr double kSmallVarianceWarning = 0.05;

/// Response side of a dataset in the form the solver consumes.
struct ResponseModel {
  std::vector<std::string> names;
  std::vector<Family> family;
  std::vector<int> n_categories;  ///< C_r for ordinal, 2 for binary, 0 for numeric
  Matrix y;                       ///< N x R: raw values, 0/1, or codes 1..C

  Index n() const { return y.rows(); }
  Index r() const { return y.cols(); }
  bool has_numeric() const;
  bool has_ordinal() const;
  int count(Family f) const;
};

ResponseModel response_model(const Dataset& data);

/// F(eta) = 1 / (1 + exp(-eta)), evaluated without overflow.
double logistic_cdf(double eta);
/// log F(eta), accurate for large |eta|.
double log_logistic_cdf(double eta);

/// Category probabilities F(t_c - theta) - F(t_{c-1} - theta), c = 1..C.
Vector ordinal_category_probs(double theta, const Vector& thresholds);
/// Probability of one category (1-based), computed from the tail with more precision.
double ordinal_category_prob(int y, double theta, const Vector& thresholds);

/// Throws ContractError unless the thresholds are strictly increasing.
void check_thresholds(const Vector& thresholds);

/// E(p | y, theta, t) for p = F(y* - theta) with y* logistic, truncated to
/// category y's threshold interval. The integral of F f over [a, b] is
/// (F(b)^2 - F(a)^2) / 2, so the ratio simplifies to (F(a) + F(b)) / 2.
double expected_latent_prob(int y, double theta, const Vector& thresholds);

/// Negative log-likelihood of one cell.
double cell_nll(Family family, double y, double theta, const Vector& thresholds, double sigma2);
/// xi = d cell_nll / d theta. For ordinal cells this is 1 - 2 E(p | ...), which
/// equals the derivative of the observed-data negative log-likelihood.
double cell_score(Family family, double y, double theta, const Vector& thresholds, double sigma2);

/// Per-family curvature bound kappa with cell_nll'' <= kappa everywhere.
double curvature_bound(Family family, int n_categories, double sigma2);

/// kappa* = max over the families present of their curvature bound. Ordinal
/// responses with three or more categories need 1/2; two-category ordinal and
/// binary cells need 1/4; numeric cells need 1/sigma^2.
double kappa_star(const ResponseModel& model, double sigma2);

struct NllResult {
  double total = 0.0;
  Matrix cells;  ///< N x R per-cell values
};

/// Total and per-cell negative log-likelihood. `thresholds[r]` is used for ordinal r.
NllResult nll(const ResponseModel& model, const Matrix& theta, const std::vector<Vector>& thresholds,
              double sigma2);
NllResult nll(const Dataset& data, const Matrix& theta, const std::vector<Vector>& thresholds, double sigma2);

struct WorkingResponse {
  Matrix z;  ///< theta - xi / kappa*
  double kappa = 0.25;
  std::vector<std::string> warnings;
};

WorkingResponse working_response(const Matrix& theta, const ResponseModel& model,
                                 const std::vector<Vector>& thresholds, double sigma2);
WorkingResponse working_response(const Matrix& theta, const Dataset& data,
                                 const std::vector<Vector>& thresholds, double sigma2);

}  // namespace gmr3
