#pragma once

// Independent reference computations and random instances shared by the
// unit and acceptance tests. Nothing here calls the library's solvers.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "gmr3/dataset.hpp"
#include "gmr3/likelihood.hpp"
#include "gmr3/mm_solver.hpp"

namespace testing_support {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Monotone regression by enumerating every partition into consecutive blocks.

inline Vector brute_force_monotone(const Vector& y, const Vector& w, bool increasing) {
  const int n = static_cast<int>(y.size());
  double best = std::numeric_limits<double>::infinity();
  Vector best_fit = y;
  for (unsigned mask = 0; mask < (1u << (n - 1)); ++mask) {
    Vector fit(n);
    int start = 0;
    std::vector<double> means;
    for (int i = 0; i < n; ++i) {
      const bool cut = i == n - 1 || (mask >> i) & 1u;
      if (!cut) continue;
      double sw = 0.0, swy = 0.0;
      for (int k = start; k <= i; ++k) sw += w[k], swy += w[k] * y[k];
      for (int k = start; k <= i; ++k) fit[k] = swy / sw;
      means.push_back(swy / sw);
      start = i + 1;
    }
    bool ok = true;
    for (std::size_t k = 1; k < means.size(); ++k)
      ok = ok && (increasing ? means[k] >= means[k - 1] : means[k] <= means[k - 1]);
    if (!ok) continue;
    const double sse = w.dot((y - fit).cwiseAbs2());
    if (sse < best) best = sse, best_fit = fit;
  }
  return best_fit;
}

// ---------------------------------------------------------------------------
// Adaptive Simpson quadrature.

inline double simpson_rec(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                          double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-12) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return simpson_rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50);
}

/// E(F(y* - theta) | t_{y-1} <= y* < t_y) for logistic y* centred at theta.
inline double quadrature_expected_p(int y, double theta, const Vector& t) {
  const double lo = y == 1 ? theta - 40.0 : t[y - 2];
  const double hi = y == static_cast<int>(t.size()) + 1 ? theta + 40.0 : t[y - 1];
  auto dens = [&](double u) {
    const double s = sigmoid(u - theta);
    return s * (1.0 - s);
  };
  const double num = integrate([&](double u) { return sigmoid(u - theta) * dens(u); }, lo, hi);
  const double den = integrate(dens, lo, hi);
  return num / den;
}

// ---------------------------------------------------------------------------
// Logistic regression by plain IRLS (no damping); x without intercept column.

struct LogisticOracle {
  double intercept;
  Vector slopes;
};

inline LogisticOracle irls_logistic(const Matrix& x, const Vector& y) {
  const Index n = x.rows(), k = x.cols();
  Matrix d(n, k + 1);
  d.col(0).setOnes();
  d.rightCols(k) = x;
  Vector beta = Vector::Zero(k + 1);
  for (int it = 0; it < 200; ++it) {
    Vector eta = d * beta;
    Vector p = eta.unaryExpr([](double e) { return sigmoid(e); });
    Vector w = p.cwiseProduct((Vector::Ones(n) - p));
    Vector z = eta + (y - p).cwiseQuotient(w);
    Matrix xtwx = d.transpose() * w.asDiagonal() * d;
    Vector next = xtwx.ldlt().solve(d.transpose() * w.cwiseProduct(z));
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    if (change < 1e-13) break;
  }
  return {beta[0], beta.tail(k)};
}

// ---------------------------------------------------------------------------
// Proportional odds by BFGS with central-difference gradients on raw
// thresholds (unordered thresholds give +inf).

struct OrdinalOracle {
  Vector slopes;
  Vector thresholds;
};

inline double po_nll(const Matrix& x, const Vector& y, const Vector& beta, const Vector& t) {
  for (Index c = 1; c < t.size(); ++c)
    if (!(t[c] > t[c - 1])) return std::numeric_limits<double>::infinity();
  const Vector eta = x * beta;
  double f = 0.0;
  const int C = static_cast<int>(t.size()) + 1;
  for (Index i = 0; i < y.size(); ++i) {
    const int c = static_cast<int>(y[i]);
    const double up = c == C ? 1.0 : sigmoid(t[c - 1] - eta[i]);
    const double lo = c == 1 ? 0.0 : sigmoid(t[c - 2] - eta[i]);
    f -= std::log(up - lo);
  }
  return f;
}

inline Vector minimize_bfgs(const std::function<double(const Vector&)>& f, Vector x, int max_iter = 500) {
  const Index n = x.size();
  auto grad = [&](const Vector& p) {
    Vector g(n);
    for (Index j = 0; j < n; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(p[j]));
      Vector a = p, b = p;
      a[j] += h;
      b[j] -= h;
      g[j] = (f(a) - f(b)) / (2.0 * h);
    }
    return g;
  };
  Matrix hinv = Matrix::Identity(n, n);
  double fx = f(x);
  Vector g = grad(x);
  for (int it = 0; it < max_iter && g.norm() > 1e-7; ++it) {
    Vector dir = -hinv * g;
    if (dir.dot(g) >= 0.0) {
      hinv.setIdentity();
      dir = -g;
    }
    double step = 1.0, ft = 0.0;
    Vector xt;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      xt = x + step * dir;
      ft = f(xt);
      if (ft <= fx + 1e-4 * step * g.dot(dir)) break;
    }
    if (!(ft <= fx)) break;
    Vector gt = grad(xt);
    Vector s = xt - x, yv = gt - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      Matrix i = Matrix::Identity(n, n);
      hinv = (i - rho * s * yv.transpose()) * hinv * (i - rho * yv * s.transpose()) + rho * s * s.transpose();
    }
    x = xt, fx = ft, g = gt;
  }
  return x;
}

inline OrdinalOracle bfgs_proportional_odds(const Matrix& x, const Vector& y, int C) {
  const Index k = x.cols();
  Vector start = Vector::Zero(k + C - 1);
  for (int c = 0; c < C - 1; ++c) {
    double below = 0.0;
    for (Index i = 0; i < y.size(); ++i) below += y[i] <= c + 1 ? 1.0 : 0.0;
    const double p = below / static_cast<double>(y.size());
    start[k + c] = std::log(p / (1.0 - p));
  }
  Vector sol = minimize_bfgs([&](const Vector& p) { return po_nll(x, y, p.head(k), p.tail(C - 1)); }, start, 2000);
  return {sol.head(k), sol.tail(C - 1)};
}

// ---------------------------------------------------------------------------
// Random datasets.

inline Vector standardized(const Vector& x) {
  const double m = x.mean();
  const double sd = std::sqrt((x.array() - m).square().mean());
  return ((x.array() - m) / sd).matrix();
}

inline std::vector<std::string> numbered(int c) {
  std::vector<std::string> out;
  for (int k = 1; k <= c; ++k) out.push_back("c" + std::to_string(k));
  return out;
}

/// Numeric predictors, one response of the requested level generated from a
/// linear predictor with the given slopes.
inline gmr3::Dataset single_response_data(std::mt19937_64& gen, int n, int p, gmr3::Level level, int C = 2) {
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<gmr3::VariableSpec> specs;
  std::vector<Vector> cols;
  Matrix x(n, p);
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < n; ++i) x(i, j) = norm(gen);
    specs.push_back({"x" + std::to_string(j + 1), gmr3::Role::Predictor, gmr3::Level::Numeric, {}});
    cols.push_back(x.col(j));
  }
  Vector beta(p);
  for (int j = 0; j < p; ++j) beta[j] = unif(gen) - 0.5;
  Vector eta = x * beta;
  Vector y(n);
  for (;;) {
    for (int i = 0; i < n; ++i) {
      if (level == gmr3::Level::Binary) {
        y[i] = unif(gen) < sigmoid(0.3 + eta[i]) ? 1.0 : 0.0;
      } else {
        const double u = unif(gen);
        const double latent = eta[i] + std::log(u / (1.0 - u));
        int c = 1;
        for (int k = 1; k < C; ++k)
          if (latent >= -1.2 + 2.4 * (k - 1) / std::max(1, C - 2)) c = k + 1;
        y[i] = c;
      }
    }
    std::vector<int> seen(static_cast<std::size_t>(C + 1), 0);
    for (int i = 0; i < n; ++i) seen[static_cast<std::size_t>(y[i])] = 1;
    const int first = level == gmr3::Level::Binary ? 0 : 1;
    bool all = true;
    for (int c = first; c < first + C; ++c) all = all && seen[static_cast<std::size_t>(c)];
    if (all) break;
  }
  gmr3::VariableSpec r{"y", gmr3::Role::Response, level, {}};
  r.categories = level == gmr3::Level::Binary ? std::vector<std::string>{"0", "1"} : numbered(C);
  specs.push_back(r);
  cols.push_back(y);
  return gmr3::Dataset(gmr3::VariableSchema(std::move(specs)), std::move(cols));
}

/// Random mixed-type instance: numeric, binary, nominal and ordinal
/// predictors; numeric, binary and ordinal responses; rank-1 or rank-2 signal.
struct Instance {
  gmr3::Dataset data;
  int rank;
};

inline Instance random_instance(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 3);
  const int n = 60 + static_cast<int>(unif(gen) * 90);
  const int p = 2 + static_cast<int>(unif(gen) * 3);
  const int r = 2 + static_cast<int>(unif(gen) * 3);
  const int rank = 1 + static_cast<int>(unif(gen) * std::min(2, std::min(p, r)));

  std::vector<gmr3::VariableSpec> specs;
  std::vector<Vector> cols;
  Matrix phi(n, p);
  for (int j = 0; j < p; ++j) {
    const int kind = pick(gen);
    gmr3::VariableSpec v{"p" + std::to_string(j + 1), gmr3::Role::Predictor, gmr3::Level::Numeric, {}};
    Vector col(n);
    if (kind == 0) {
      for (int i = 0; i < n; ++i) col[i] = 10.0 + 3.0 * norm(gen);
      phi.col(j) = standardized(col);
    } else {
      const int C = kind == 1 ? 2 : 3 + static_cast<int>(unif(gen) * 2);
      v.level = kind == 1 ? gmr3::Level::Binary : (kind == 2 ? gmr3::Level::Nominal : gmr3::Level::Ordinal);
      v.categories = numbered(C);
      for (int i = 0; i < n; ++i) col[i] = 1 + (i % C);  // every category present
      std::shuffle(col.data(), col.data() + n, gen);
      Vector scores(C);
      for (int c = 0; c < C; ++c) scores[c] = kind == 2 ? norm(gen) : c;
      Vector f(n);
      for (int i = 0; i < n; ++i) f[i] = scores[static_cast<Index>(col[i]) - 1];
      phi.col(j) = standardized(f);
    }
    specs.push_back(v);
    cols.push_back(col);
  }
  Matrix b(p, rank), v(r, rank);
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = 0.8 * norm(gen);
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = unif(gen) * 2.0 - 1.0;
  Matrix theta = phi * b * v.transpose();
  for (int k = 0; k < r; ++k) {
    const int kind = static_cast<int>(unif(gen) * 3);
    gmr3::VariableSpec s{"r" + std::to_string(k + 1), gmr3::Role::Response, gmr3::Level::Numeric, {}};
    Vector y(n);
    for (int attempt = 0;; ++attempt) {
      if (kind == 0) {
        for (int i = 0; i < n; ++i) y[i] = 1.0 + theta(i, k) + norm(gen);
        break;
      }
      const int C = kind == 1 ? 2 : 3 + static_cast<int>(unif(gen) * 2);
      s.level = kind == 1 ? gmr3::Level::Binary : gmr3::Level::Ordinal;
      s.categories = kind == 1 ? std::vector<std::string>{"0", "1"} : numbered(C);
      std::vector<int> count(static_cast<std::size_t>(C), 0);
      for (int i = 0; i < n; ++i) {
        const double u = unif(gen);
        const double latent = theta(i, k) + std::log(u / (1.0 - u));
        if (kind == 1) {
          y[i] = latent > 0.0 ? 1.0 : 0.0;
          ++count[static_cast<std::size_t>(y[i])];
        } else {
          int c = 1;
          for (int t = 1; t < C; ++t)
            if (latent >= -1.0 + 2.0 * (t - 1) / (C - 2)) c = t + 1;
          y[i] = c;
          ++count[static_cast<std::size_t>(c - 1)];
        }
      }
      if (*std::min_element(count.begin(), count.end()) > 0) break;
    }
    specs.push_back(s);
    cols.push_back(y);
  }
  return {gmr3::Dataset(gmr3::VariableSchema(std::move(specs)), std::move(cols)), rank};
}

}  // namespace testing_support

namespace testing_support {

/// Largest L(theta) - M(theta | vartheta) over a grid of (theta, vartheta) in
/// [-4, 4]^2 for one cell, where M is the quadratic majorizer with curvature
/// kappa built from the library's score. Positive values are violations.
inline double majorization_violation(gmr3::Family family, double y, const Vector& t, double sigma2, double kappa,
                                     int grid = 81) {
  double worst = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < grid; ++a) {
    const double vt = -4.0 + 8.0 * a / (grid - 1);
    const double lv = gmr3::cell_nll(family, y, vt, t, sigma2);
    const double xi = gmr3::cell_score(family, y, vt, t, sigma2);
    for (int b = 0; b < grid; ++b) {
      const double th = -4.0 + 8.0 * b / (grid - 1);
      const double m = lv + xi * (th - vt) + 0.5 * kappa * (th - vt) * (th - vt);
      worst = std::max(worst, gmr3::cell_nll(family, y, th, t, sigma2) - m);
    }
  }
  return worst;
}

/// Central finite difference of the observed-data cell NLL.
inline double fd_score(gmr3::Family family, double y, double theta, const Vector& t, double sigma2,
                       double h = 1e-5) {
  return (gmr3::cell_nll(family, y, theta + h, t, sigma2) - gmr3::cell_nll(family, y, theta - h, t, sigma2)) /
         (2.0 * h);
}

}  // namespace testing_support

namespace testing_support {

/// Implied coefficients of the published five-predictor, seven-response
/// survey model (rows A, PA, G, U, E; columns T, FE, CI, MW, FS, DI, RE).
inline Matrix published_coefficients() {
  Matrix c(5, 7);
  c << -0.16, -0.27, -0.05, 0.06, 0.17, 0.50, 0.23,  //
      -0.63, -0.28, -0.60, -0.22, -0.38, 0.11, -0.31,  //
      -0.06, 0.06, -0.10, -0.07, -0.15, -0.19, -0.16,  //
      0.21, 0.08, 0.21, 0.08, 0.14, -0.01, 0.12,  //
      0.34, 0.17, 0.31, 0.11, 0.18, -0.10, 0.14;
  return c;
}

/// The published model assembled as ModelParams: quantifications for party,
/// gender and urbanization, education scores with 0.32 at Bachelor, age
/// scaled so that 70 maps to 1.25, intercept 0.45 for T and thresholds
/// (-2.57, -0.91, 1.80) for CI.
inline gmr3::ModelParams published_model() {
  using namespace gmr3;
  const VariableSchema schema = eurobarometer_schema();
  ModelParams p;
  p.rank = 5;
  Eigen::JacobiSVD<Matrix> svd(published_coefficients(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  p.b = svd.matrixU() * svd.singularValues().asDiagonal();
  p.v = svd.matrixV();
  p.m = Vector::Zero(7);
  p.m[0] = 0.45;
  p.thresholds.assign(7, Vector());
  const Vector worked = (Vector(3) << -2.57, -0.91, 1.80).finished();
  for (int r = 2; r < 7; ++r) p.thresholds[static_cast<std::size_t>(r)] = worked;
  p.sigma2 = 1.0;
  for (std::size_t j : schema.responses()) {
    p.response_names.push_back(schema[j].name);
    p.families.push_back(schema[j].level == Level::Binary ? Family::Binary : Family::Ordinal);
  }
  auto discrete = [&](const std::string& name, std::initializer_list<double> scores) {
    PredictorTransform t;
    t.name = name;
    t.level = schema[schema.index_of(name)].level;
    t.categories = schema[schema.index_of(name)].categories;
    t.quantification.level = t.level;
    t.quantification.scores = Vector(static_cast<Index>(scores.size()));
    Index i = 0;
    for (double s : scores) t.quantification.scores[i++] = s;
    return t;
  };
  PredictorTransform age;
  age.name = "A";
  age.level = Level::Numeric;
  age.mean = 50.0;
  age.sd = 16.0;
  p.transforms.push_back(age);
  p.transforms.push_back(discrete("PA", {-1.13, 0.36, 1.31}));
  p.transforms.push_back(discrete("G", {-0.72, 1.39}));
  p.transforms.push_back(discrete("U", {-0.64, -0.44, 1.82}));
  const double d[9] = {0.0, 0.0, 0.8235, 0.9706, 1.882, 1.882, 2.382, 2.853, 5.206};
  PredictorTransform e = discrete("E", {0, 0, 0, 0, 0, 0, 0, 0, 0});
  for (int c = 0; c < 9; ++c) e.quantification.scores[c] = 0.32 + d[c] - d[6];
  p.transforms.push_back(e);
  return p;
}

/// A 70-year-old left-leaning rural woman with a bachelor's degree.
inline const char* published_profile_csv() { return "A,PA,G,U,E\n70,Left,Female,Rural,Bachelor\n"; }

}  // namespace testing_support
