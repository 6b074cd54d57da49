#include "gmr3/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gmr3/error.hpp"
#include "gmr3/kernels.hpp"

namespace gmr3 {

bool ResponseModel::has_numeric() const { return count(Family::Numeric) > 0; }
bool ResponseModel::has_ordinal() const { return count(Family::Ordinal) > 0; }

int ResponseModel::count(Family f) const {
  return static_cast<int>(std::count(family.begin(), family.end(), f));
}

ResponseModel response_model(const Dataset& data) {
  const auto resp = data.schema().responses();
  ResponseModel m;
  m.y.resize(data.n(), static_cast<Index>(resp.size()));
  for (std::size_t r = 0; r < resp.size(); ++r) {
    const auto& v = data.schema()[resp[r]];
    m.names.push_back(v.name);
    switch (v.level) {
      case Level::Numeric:
        m.family.push_back(Family::Numeric);
        m.n_categories.push_back(0);
        break;
      case Level::Binary:
        m.family.push_back(Family::Binary);
        m.n_categories.push_back(2);
        break;
      case Level::Ordinal:
        m.family.push_back(Family::Ordinal);
        m.n_categories.push_back(v.n_categories());
        break;
      case Level::Nominal:
        throw DataError("nominal response '" + v.name + "' is not supported");
    }
    m.y.col(static_cast<Index>(r)) = data.column(resp[r]);
  }
  return m;
}

double logistic_cdf(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  double e = std::exp(eta);
  return e / (1.0 + e);
}

double log_logistic_cdf(double eta) {
  // log F(eta) = -log(1 + exp(-eta))
  if (eta >= 0.0) return -std::log1p(std::exp(-eta));
  return eta - std::log1p(std::exp(eta));
}

void check_thresholds(const Vector& t) {
  for (Index c = 0; c < t.size(); ++c) {
    if (!std::isfinite(t[c])) throw ContractError("thresholds must be finite");
    if (c > 0 && !(t[c] > t[c - 1])) throw ContractError("thresholds must be strictly increasing");
  }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Interval [lower, upper) of category y (1-based) on the latent scale minus theta.
inline void interval(int y, double theta, const Vector& t, double& lower, double& upper) {
  const int C = static_cast<int>(t.size()) + 1;
  lower = y <= 1 ? -kInf : t[y - 2] - theta;
  upper = y >= C ? kInf : t[y - 1] - theta;
}

inline double cdf_ext(double x) {
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  return logistic_cdf(x);
}

}  // namespace

double ordinal_category_prob(int y, double theta, const Vector& t) {
  const int C = static_cast<int>(t.size()) + 1;
  if (y < 1 || y > C) throw ContractError("ordinal category out of range");
  double a = 0.0;
  double b = 0.0;
  interval(y, theta, t, a, b);
  // Both ends in the upper tail: use survival functions to avoid cancellation.
  if (a > 0.0) return cdf_ext(-a) - cdf_ext(-b);
  return cdf_ext(b) - cdf_ext(a);
}

Vector ordinal_category_probs(double theta, const Vector& t) {
  check_thresholds(t);
  const int C = static_cast<int>(t.size()) + 1;
  Vector p(C);
  for (int c = 1; c <= C; ++c) p[c - 1] = ordinal_category_prob(c, theta, t);
  return p;
}

double expected_latent_prob(int y, double theta, const Vector& t) {
  const int C = static_cast<int>(t.size()) + 1;
  if (y < 1 || y > C) throw ContractError("expected_latent_prob: category out of range");
  double a = 0.0;
  double b = 0.0;
  interval(y, theta, t, a, b);
  return 0.5 * (cdf_ext(a) + cdf_ext(b));
}

double cell_nll(Family family, double y, double theta, const Vector& t, double sigma2) {
  switch (family) {
    case Family::Numeric: {
      double e = y - theta;
      return 0.5 * e * e / sigma2 + 0.5 * std::log(2.0 * std::numbers::pi * sigma2);
    }
    case Family::Binary: {
      double q = 2.0 * y - 1.0;
      return -log_logistic_cdf(q * theta);
    }
    case Family::Ordinal: {
      double p = ordinal_category_prob(static_cast<int>(y), theta, t);
      return -std::log(std::max(p, kProbFloor));
    }
  }
  return 0.0;
}

double cell_score(Family family, double y, double theta, const Vector& t, double sigma2) {
  switch (family) {
    case Family::Numeric: return (theta - y) / sigma2;
    case Family::Binary: return -(y - logistic_cdf(theta));
    case Family::Ordinal: return 1.0 - 2.0 * expected_latent_prob(static_cast<int>(y), theta, t);
  }
  return 0.0;
}

double curvature_bound(Family family, int n_categories, double sigma2) {
  switch (family) {
    case Family::Numeric: return 1.0 / sigma2;
    case Family::Binary: return 0.25;
    case Family::Ordinal: return n_categories >= 3 ? 0.5 : 0.25;
  }
  return 0.25;
}

double kappa_star(const ResponseModel& model, double sigma2) {
  double k = 0.25;
  for (std::size_t r = 0; r < model.family.size(); ++r)
    k = std::max(k, curvature_bound(model.family[r], model.n_categories[r], sigma2));
  return k;
}

NllResult nll(const ResponseModel& model, const Matrix& theta, const std::vector<Vector>& thresholds,
              double sigma2) {
  if (model.has_numeric() && !(sigma2 > 0.0)) throw ContractError("nll: sigma2 must be positive");
  if (theta.rows() != model.n() || theta.cols() != model.r()) throw ContractError("nll: theta shape mismatch");
  for (Index r = 0; r < model.r(); ++r)
    if (model.family[static_cast<std::size_t>(r)] == Family::Ordinal)
      check_thresholds(thresholds.at(static_cast<std::size_t>(r)));
  NllResult out;
  kernels::CellGrid grid{&model, &theta, &thresholds, sigma2};
  kernels::cell_nll(grid, out.cells);
  out.total = kernels::ordered_sum(out.cells);
  return out;
}

NllResult nll(const Dataset& data, const Matrix& theta, const std::vector<Vector>& thresholds, double sigma2) {
  return nll(response_model(data), theta, thresholds, sigma2);
}

WorkingResponse working_response(const Matrix& theta, const ResponseModel& model,
                                 const std::vector<Vector>& thresholds, double sigma2) {
  if (theta.rows() != model.n() || theta.cols() != model.r())
    throw ContractError("working_response: theta shape mismatch");
  if (!theta.allFinite()) throw NumericalError("working_response: non-finite canonical parameters");
  WorkingResponse out;
  if (model.has_numeric()) {
    if (!(sigma2 > 0.0)) throw NumericalError("working_response: residual variance is not positive");
    if (sigma2 < kSmallVarianceWarning)
      out.warnings.push_back("estimated residual variance " + std::to_string(sigma2) +
                             " < 0.05; the working response may stall");
  }
  out.kappa = kappa_star(model, model.has_numeric() ? sigma2 : 1.0);
  kernels::CellGrid grid{&model, &theta, &thresholds, sigma2};
  kernels::working_response(grid, out.kappa, out.z);
  return out;
}

WorkingResponse working_response(const Matrix& theta, const Dataset& data,
                                 const std::vector<Vector>& thresholds, double sigma2) {
  return working_response(theta, response_model(data), thresholds, sigma2);
}

}  // namespace gmr3
