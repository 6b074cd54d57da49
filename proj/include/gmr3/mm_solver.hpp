#pragma once

// Maximum-likelihood fitting of the rank-constrained mixed-response model
//
//   theta_ir = m_r + phi_i' B v_r
//
// by majorization-minimization: every iteration replaces the negative
// log-likelihood by a least-squares surrogate || Z - 1 m' - Phi B V' ||^2
// built from the working response Z, then updates quantifications, weights,
// loadings, intercepts, residual variance and thresholds in turn.

#include <optional>
#include <string>
#include <vector>

#include "gmr3/dataset.hpp"
#include "gmr3/likelihood.hpp"
#include "gmr3/scaling.hpp"

namespace gmr3 {

struct ModelParams {
  int rank = 0;                       ///< S
  Vector m;                           ///< R intercepts, 0 at ordinal positions
  Matrix b;                           ///< P x S weights
  Matrix v;                           ///< R x S loadings, V'V = I
  std::vector<Vector> thresholds;     ///< per response; empty unless ordinal
  double sigma2 = 1.0;                ///< shared residual variance of numeric responses
  std::vector<PredictorTransform> transforms;  ///< per predictor scaling
  std::vector<std::string> response_names;
  std::vector<Family> families;

  /// Implied coefficients B V' (P x R).
  Matrix coefficients() const { return b * v.transpose(); }
};

enum class StepOrder {
  /// working response, quantifications, B, V, m, sigma2, thresholds
  Standard,
  /// working response, V, B, m, quantifications, sigma2, thresholds
  LoadingsFirst,
};

struct FitOptions {
  double tolerance = 1e-6;
  int max_iterations = 1000;
  std::uint64_t seed = 0;
  std::optional<ModelParams> warm_start;
  StepOrder step_order = StepOrder::Standard;
  /// Apply the U'U-diagonal identification at convergence.
  bool identify = true;
};

struct FitResult {
  ModelParams params;
  std::vector<double> nll_trace;  ///< NLL at the start and after every iteration
  int iterations = 0;
  bool converged = false;
  int n_parameters = 0;  ///< K
  std::vector<std::string> warnings;

  double nll() const { return nll_trace.empty() ? 0.0 : nll_trace.back(); }
};

/// Rank-S reduced rank regression start with every variable treated as numeric.
ModelParams init_params(const Dataset& data, int rank, std::vector<std::string>* warnings = nullptr);

/// Cholesky factor of Phi'Phi with a check for collinear predictors.
class WeightSolver {
 public:
  explicit WeightSolver(const Matrix& phi, const std::vector<std::string>& names = {});
  /// argmin_B || z_tilde - Phi B V' ||^2 for orthonormal V: (Phi'Phi)^-1 Phi' z_tilde V.
  Matrix solve(const Matrix& phi, const Matrix& z_tilde, const Matrix& v) const;

 private:
  Eigen::LLT<Matrix> llt_;
};

Matrix update_weights(const Matrix& z_tilde, const Matrix& phi, const Matrix& v);

/// argmin_V || z_tilde - Phi B V' ||^2 subject to V'V = I via the SVD of B'Phi'z_tilde.
Matrix update_loadings(const Matrix& z_tilde, const Matrix& phi, const Matrix& b,
                       std::vector<std::string>* warnings = nullptr);

/// Column means of z_tilde at numeric and binary positions, 0 at ordinal positions.
Vector update_intercepts(const Matrix& z_tilde, const std::vector<Family>& families);

/// Sum of squared residuals over numeric columns divided by (N R_numeric - 1).
double update_sigma2(const Matrix& z_tilde, const Vector& m, const Matrix& phi, const Matrix& b,
                     const Matrix& v, const std::vector<Family>& families,
                     std::vector<std::string>* warnings = nullptr);

/// Maximum-likelihood thresholds for one ordinal column with theta fixed,
/// by Newton's method on log-gap parameters. `start` may be empty.
Vector update_thresholds(const Vector& y, const Vector& theta, int n_categories, const Vector& start = {});

/// Thresholds of the null model: logits of cumulative proportions.
Vector null_thresholds(const Vector& y, int n_categories);

struct Identified {
  Matrix b;
  Matrix v;
};

/// Rotates (B, V) so that U'U (U = Phi B) is diagonal with decreasing entries,
/// and flips signs so the largest-magnitude loading of each dimension is positive.
Identified identify(const Matrix& b, const Matrix& v, const Matrix& phi);

FitResult fit(const Dataset& data, int rank, const FitOptions& options = {});

struct Prediction {
  Matrix theta;  ///< N x R canonical parameters
  /// numeric: mean; binary: P(y = 1); ordinal: unused (see probabilities)
  Matrix expected;
  /// per response: N x C category probabilities (ordinal only)
  std::vector<Matrix> probabilities;
  /// per response: N x 1 class whose threshold interval contains theta (ordinal only)
  std::vector<Eigen::VectorXi> classes;
};

Matrix canonical(const ModelParams& params, const Matrix& phi);
Prediction predict(const ModelParams& params, const Matrix& phi);
Prediction predict(const ModelParams& params, const Dataset& data, bool neutral_unknown = false);

/// Ordinal class c with t_{c-1} <= theta < t_c.
int classify_ordinal(double theta, const Vector& thresholds);

}  // namespace gmr3
