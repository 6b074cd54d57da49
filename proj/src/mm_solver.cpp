#include "gmr3/mm_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "gmr3/error.hpp"
#include "gmr3/model_selection.hpp"

namespace gmr3 {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

Matrix response_start_matrix(const ResponseModel& model) {
  // binary 0/1 and ordinal codes are used as numbers for the start
  return model.y;
}

struct WarningLog {
  std::vector<std::string>* out;
  std::set<std::string> seen;
  void add(const std::string& key, const std::string& text) {
    if (out && seen.insert(key).second) out->push_back(text);
  }
};

ModelParams start_from_scaling(const Dataset& data, const ScaledPredictors& sc, const ResponseModel& model,
                               int rank, std::vector<std::string>* warnings) {
  const Matrix& phi = sc.phi;
  const Index P = phi.cols();
  const Index R = model.r();
  if (rank < 1 || rank > std::min(P, R))
    throw ContractError("rank S = " + std::to_string(rank) + " must satisfy 1 <= S <= min(P, R) = " +
                        std::to_string(std::min(P, R)));
  Matrix y = response_start_matrix(model);
  Vector ybar = y.colwise().mean();
  Matrix yc = y.rowwise() - ybar.transpose();

  Matrix gram = phi.transpose() * phi;
  Eigen::LLT<Matrix> llt(gram);
  bool ill = llt.info() != Eigen::Success;
  if (!ill) {
    Vector d = Matrix(llt.matrixL()).diagonal();
    ill = d.minCoeff() < 1e-7 * d.maxCoeff();
  }
  if (ill) {
    gram.diagonal().array() += 1e-8 * std::max(1.0, gram.diagonal().maxCoeff());
    llt.compute(gram);
    if (warnings) warnings->push_back("init: Phi'Phi is near singular; added ridge jitter 1e-8");
  }
  Matrix ols = llt.solve(phi.transpose() * yc);

  Eigen::JacobiSVD<Matrix> svd(ols, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ModelParams params;
  params.rank = rank;
  params.b = svd.matrixU().leftCols(rank) * svd.singularValues().head(rank).asDiagonal();
  params.v = svd.matrixV().leftCols(rank);
  params.m = Vector::Zero(R);
  params.thresholds.assign(static_cast<std::size_t>(R), Vector());
  for (Index r = 0; r < R; ++r) {
    const auto f = model.family[static_cast<std::size_t>(r)];
    if (f == Family::Numeric) {
      params.m[r] = ybar[r];
    } else if (f == Family::Binary) {
      params.m[r] = logit(std::clamp(ybar[r], 1e-6, 1.0 - 1e-6));
    } else {
      params.thresholds[static_cast<std::size_t>(r)] =
          null_thresholds(model.y.col(r), model.n_categories[static_cast<std::size_t>(r)]);
    }
  }
  params.sigma2 = 1.0;
  params.transforms = sc.transforms;
  params.response_names = model.names;
  params.families = model.family;
  (void)data;
  return params;
}

// Numeric part of the NLL as a function of sigma2 for a fixed residual sum of squares.
double numeric_nll(double sse, double n_cells, double sigma2) {
  return 0.5 * sse / sigma2 + 0.5 * n_cells * std::log(2.0 * std::numbers::pi * sigma2);
}

}  // namespace

ModelParams init_params(const Dataset& data, int rank, std::vector<std::string>* warnings) {
  ScaledPredictors sc = initial_scaling(data);
  ResponseModel model = response_model(data);
  return start_from_scaling(data, sc, model, rank, warnings);
}

WeightSolver::WeightSolver(const Matrix& phi, const std::vector<std::string>& names) {
  Matrix gram = phi.transpose() * phi;
  llt_.compute(gram);
  bool singular = llt_.info() != Eigen::Success;
  if (!singular) {
    Vector d = Matrix(llt_.matrixL()).diagonal();
    singular = d.minCoeff() < 1e-8 * d.maxCoeff();
  }
  if (!singular) return;
  Eigen::ColPivHouseholderQR<Matrix> qr(phi);
  qr.setThreshold(1e-10);
  std::string cols;
  const auto perm = qr.colsPermutation().indices();
  for (Index k = qr.rank(); k < phi.cols(); ++k) {
    Index j = perm[k];
    std::string name = j < static_cast<Index>(names.size()) ? names[static_cast<std::size_t>(j)]
                                                               : "column " + std::to_string(j + 1);
    cols += (cols.empty() ? "" : ", ") + name;
  }
  throw NumericalError("Phi'Phi is singular; collinear predictors: " + (cols.empty() ? "unknown" : cols));
}

Matrix WeightSolver::solve(const Matrix& phi, const Matrix& z_tilde, const Matrix& v) const {
  return llt_.solve(phi.transpose() * (z_tilde * v));
}

Matrix update_weights(const Matrix& z_tilde, const Matrix& phi, const Matrix& v) {
  if (z_tilde.rows() != phi.rows() || z_tilde.cols() != v.rows())
    throw ContractError("update_weights: shape mismatch");
  return WeightSolver(phi).solve(phi, z_tilde, v);
}

Matrix update_loadings(const Matrix& z_tilde, const Matrix& phi, const Matrix& b,
                       std::vector<std::string>* warnings) {
  const Index S = b.cols();
  Matrix cross = b.transpose() * (phi.transpose() * z_tilde);  // S x R
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  if (warnings && S > 0 && sv[S - 1] <= 1e-12 * std::max(1.0, sv[0]))
    warnings->push_back("update_loadings: B'Phi'Z is rank deficient; singular vectors completed arbitrarily");
  return svd.matrixV().leftCols(S) * svd.matrixU().transpose();
}

Vector update_intercepts(const Matrix& z_tilde, const std::vector<Family>& families) {
  Vector m = Vector::Zero(z_tilde.cols());
  for (Index r = 0; r < z_tilde.cols(); ++r)
    if (families[static_cast<std::size_t>(r)] != Family::Ordinal) m[r] = z_tilde.col(r).mean();
  return m;
}

double update_sigma2(const Matrix& z_tilde, const Vector& m, const Matrix& phi, const Matrix& b,
                     const Matrix& v, const std::vector<Family>& families, std::vector<std::string>* warnings) {
  double sse = 0.0;
  Index cells = 0;
  Matrix fitted = phi * b * v.transpose();
  for (Index r = 0; r < z_tilde.cols(); ++r) {
    if (families[static_cast<std::size_t>(r)] != Family::Numeric) continue;
    sse += (z_tilde.col(r).array() - m[r] - fitted.col(r).array()).square().sum();
    cells += z_tilde.rows();
  }
  if (cells == 0) throw ContractError("update_sigma2: no numeric responses");
  double s2 = sse / static_cast<double>(cells - 1);
  if (warnings && s2 < kSmallVarianceWarning)
    warnings->push_back("estimated residual variance " + std::to_string(s2) + " < 0.05");
  return s2;
}

Vector null_thresholds(const Vector& y, int n_categories) {
  Vector counts = Vector::Zero(n_categories);
  for (Index i = 0; i < y.size(); ++i) {
    int c = static_cast<int>(y[i]);
    if (c < 1 || c > n_categories) throw ContractError("ordinal code out of range");
    counts[c - 1] += 1.0;
  }
  Vector t(n_categories - 1);
  double cum = 0.0;
  const double n = static_cast<double>(y.size());
  for (int c = 0; c < n_categories - 1; ++c) {
    if (counts[c] == 0.0) throw DataError("ordinal category " + std::to_string(c + 1) + " is not observed");
    cum += counts[c];
    t[c] = logit(cum / n);
  }
  if (counts[n_categories - 1] == 0.0)
    throw DataError("ordinal category " + std::to_string(n_categories) + " is not observed");
  return t;
}

namespace {

struct ThresholdObjective {
  const Vector& y;
  const Vector& theta;
  int n_categories;

  double value(const Vector& t) const {
    double f = 0.0;
    for (Index i = 0; i < y.size(); ++i)
      f -= std::log(std::max(ordinal_category_prob(static_cast<int>(y[i]), theta[i], t), kProbFloor));
    return f;
  }

  // gradient and tridiagonal Hessian in t
  void derivatives(const Vector& t, Vector& g, Matrix& h) const {
    const Index K = t.size();
    g = Vector::Zero(K);
    h = Matrix::Zero(K, K);
    for (Index i = 0; i < y.size(); ++i) {
      const int c = static_cast<int>(y[i]);
      const double p = std::max(ordinal_category_prob(c, theta[i], t), kProbFloor);
      double fa = 0.0, fb = 0.0, dfa = 0.0, dfb = 0.0;
      if (c >= 2) {
        double a = t[c - 2] - theta[i];
        double F = logistic_cdf(a);
        fa = F * (1.0 - F);
        dfa = fa * (1.0 - 2.0 * F);
      }
      if (c <= K) {
        double b = t[c - 1] - theta[i];
        double F = logistic_cdf(b);
        fb = F * (1.0 - F);
        dfb = fb * (1.0 - 2.0 * F);
      }
      if (c <= K) {
        g[c - 1] -= fb / p;
        h(c - 1, c - 1) += -dfb / p + fb * fb / (p * p);
      }
      if (c >= 2) {
        g[c - 2] += fa / p;
        h(c - 2, c - 2) += dfa / p + fa * fa / (p * p);
      }
      if (c >= 2 && c <= K) {
        double off = -fa * fb / (p * p);
        h(c - 1, c - 2) += off;
        h(c - 2, c - 1) += off;
      }
    }
  }
};

Vector thresholds_from_gaps(const Vector& gamma) {
  Vector t(gamma.size());
  t[0] = gamma[0];
  for (Index c = 1; c < gamma.size(); ++c) t[c] = t[c - 1] + std::exp(gamma[c]);
  return t;
}

Vector gaps_from_thresholds(const Vector& t) {
  Vector gamma(t.size());
  gamma[0] = t[0];
  for (Index c = 1; c < t.size(); ++c) gamma[c] = std::log(t[c] - t[c - 1]);
  return gamma;
}

}  // namespace

Vector update_thresholds(const Vector& y, const Vector& theta, int n_categories, const Vector& start) {
  if (y.size() != theta.size()) throw ContractError("update_thresholds: length mismatch");
  const Index K = n_categories - 1;
  Vector t;
  bool usable = start.size() == K;
  for (Index c = 1; usable && c < K; ++c) usable = start[c] > start[c - 1];
  if (usable) {
    t = start;
  } else {
    t = null_thresholds(y, n_categories).array() + theta.mean();
  }
  // validates that every category is observed
  (void)null_thresholds(y, n_categories);

  ThresholdObjective obj{y, theta, n_categories};
  constexpr int kMaxNewton = 50;
  constexpr double kGradTol = 1e-8;
  Vector gamma = gaps_from_thresholds(t);
  double f = obj.value(t);
  Vector g;
  Matrix h;
  for (int iter = 0; iter < kMaxNewton; ++iter) {
    obj.derivatives(t, g, h);
    if (g.lpNorm<Eigen::Infinity>() < kGradTol) return t;

    // chain rule through t_c = gamma_1 + sum_{j=2..c} exp(gamma_j)
    Matrix jac = Matrix::Zero(K, K);
    for (Index c = 0; c < K; ++c) {
      jac(c, 0) = 1.0;
      for (Index j = 1; j <= c; ++j) jac(c, j) = std::exp(gamma[j]);
    }
    Vector grad = jac.transpose() * g;
    Matrix hess = jac.transpose() * h * jac;
    Matrix full = hess;
    for (Index j = 1; j < K; ++j) full(j, j) += std::exp(gamma[j]) * g.tail(K - j).sum();
    Eigen::LLT<Matrix> llt(full);
    if (llt.info() != Eigen::Success) {
      hess.diagonal().array() += 1e-10 * std::max(1.0, hess.diagonal().maxCoeff());
      llt.compute(hess);
    }
    Vector step = -llt.solve(grad);
    // in the quadratic regime the predicted decrease is below the rounding
    // error of the objective, so the line search cannot compare values
    const double predicted = -0.5 * grad.dot(step);
    if (predicted >= 0.0 && predicted <= 1e-13 * std::max(1.0, std::abs(f))) {
      Vector trial = thresholds_from_gaps(gamma + step);
      if (trial.allFinite()) return trial;
    }

    double scale = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40 && !accepted; ++half, scale *= 0.5) {
      Vector trial_gamma = gamma + scale * step;
      Vector trial = thresholds_from_gaps(trial_gamma);
      double ft = obj.value(trial);
      if (std::isfinite(ft) && ft <= f) {
        gamma = trial_gamma;
        t = trial;
        f = ft;
        accepted = true;
      }
    }
    if (!accepted) break;
  }
  obj.derivatives(t, g, h);
  if (g.lpNorm<Eigen::Infinity>() < kGradTol) return t;
  throw ConvergenceError("update_thresholds: Newton did not reach |grad| < 1e-8 within 50 iterations (|grad| = " +
                         std::to_string(g.lpNorm<Eigen::Infinity>()) + ", thresholds span [" +
                         std::to_string(t[0]) + ", " + std::to_string(t[K - 1]) + "])");
}

Identified identify(const Matrix& b, const Matrix& v, const Matrix& phi) {
  const Index S = b.cols();
  Matrix u = phi * b;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(u.transpose() * u);
  Matrix rot(S, S);
  for (Index s = 0; s < S; ++s) rot.col(s) = eig.eigenvectors().col(S - 1 - s);
  Identified out{b * rot, v * rot};
  for (Index s = 0; s < S; ++s) {
    Index at = 0;
    double best = -1.0;
    for (Index r = 0; r < out.v.rows(); ++r) {
      // first of (numerically) equal magnitudes wins
      if (std::abs(out.v(r, s)) > best + 1e-12) {
        best = std::abs(out.v(r, s));
        at = r;
      }
    }
    if (out.v(at, s) < 0.0) {
      out.v.col(s) *= -1.0;
      out.b.col(s) *= -1.0;
    }
  }
  return out;
}

Matrix canonical(const ModelParams& params, const Matrix& phi) {
  Matrix theta = phi * (params.b * params.v.transpose());
  theta.rowwise() += params.m.transpose();
  return theta;
}

FitResult fit(const Dataset& data, int rank, const FitOptions& options) {
  if (!(options.tolerance > 0.0)) throw ContractError("fit: tolerance must be positive");
  FitResult result;
  WarningLog log{&result.warnings, {}};

  const ResponseModel model = response_model(data);
  const Index R = model.r();
  ScaledPredictors sc;
  ModelParams params;
  if (options.warm_start) {
    const ModelParams& w = *options.warm_start;
    if (w.rank != rank) throw ContractError("fit: warm start has a different rank");
    sc = scaling_with_scores(data, w.transforms);
    params = w;
    params.transforms = sc.transforms;
    params.response_names = model.names;
    params.families = model.family;
    for (Index r = 0; r < R; ++r) {
      if (model.family[static_cast<std::size_t>(r)] != Family::Ordinal) continue;
      auto& t = params.thresholds[static_cast<std::size_t>(r)];
      if (t.size() != model.n_categories[static_cast<std::size_t>(r)] - 1)
        t = null_thresholds(model.y.col(r), model.n_categories[static_cast<std::size_t>(r)]);
      else
        (void)null_thresholds(model.y.col(r), model.n_categories[static_cast<std::size_t>(r)]);
    }
  } else {
    sc = initial_scaling(data);
    params = start_from_scaling(data, sc, model, rank, &result.warnings);
  }
  Matrix& phi = sc.phi;
  const Index P = phi.cols();
  std::vector<std::string> pred_names;
  for (const auto& t : sc.transforms) pred_names.push_back(t.name);

  Matrix theta = canonical(params, phi);
  double current = nll(model, theta, params.thresholds, params.sigma2).total;
  result.nll_trace.push_back(current);

  const bool has_numeric = model.has_numeric();
  double numeric_cells = 0.0;
  for (auto f : model.family)
    if (f == Family::Numeric) numeric_cells += static_cast<double>(model.n());

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    WorkingResponse wr = working_response(theta, model, params.thresholds, params.sigma2);
    for (const auto& w : wr.warnings) log.add("small-variance", w);
    const Matrix& z = wr.z;

    auto update_quantifications = [&] {
      Matrix a = params.b * params.v.transpose();  // P x R
      Matrix resid = z - phi * a;
      resid.rowwise() -= params.m.transpose();
      for (Index p = 0; p < P; ++p) {
        auto& tr = params.transforms[static_cast<std::size_t>(p)];
        if (tr.is_numeric()) continue;
        Vector ap = a.row(p).transpose();
        double aa = ap.squaredNorm();
        if (!(aa > 1e-300)) continue;
        Vector old_phi = phi.col(p);
        Vector target = resid * ap + old_phi * aa;
        const Vector& codes = sc.codes[static_cast<std::size_t>(p)];
        const Vector& counts = sc.counts[static_cast<std::size_t>(p)];
        Vector w = Vector::Zero(counts.size());
        for (Index i = 0; i < codes.size(); ++i) w[static_cast<Index>(codes[i]) - 1] += target[i];
        w = w.cwiseQuotient(counts) / aa;
        try {
          tr.quantification = quantify(w, counts, tr.level);
        } catch (const NumericalError& e) {
          log.add("degenerate-" + tr.name,
                  "quantification of '" + tr.name + "' degenerated; previous scores kept (" + e.what() + ")");
          continue;
        }
        Vector new_phi = apply_scaling(codes, tr);
        resid -= (new_phi - old_phi) * ap.transpose();
        phi.col(p) = new_phi;
      }
    };
    auto update_b = [&] {
      Matrix zt = z.rowwise() - params.m.transpose();
      params.b = WeightSolver(phi, pred_names).solve(phi, zt, params.v);
    };
    auto update_v = [&] {
      Matrix zt = z.rowwise() - params.m.transpose();
      std::vector<std::string> w;
      params.v = update_loadings(zt, phi, params.b, &w);
      for (const auto& s : w) log.add("rank-deficient-v", s);
    };
    auto update_m = [&] { params.m = update_intercepts(z - phi * params.b * params.v.transpose(), model.family); };

    if (options.step_order == StepOrder::Standard) {
      update_quantifications();
      update_b();
      update_v();
      update_m();
    } else {
      update_v();
      update_b();
      update_m();
      update_quantifications();
    }

    theta = canonical(params, phi);

    if (has_numeric) {
      std::vector<std::string> w;
      double proposed = update_sigma2(model.y, params.m, phi, params.b, params.v, model.family, &w);
      double sse = 0.0;
      for (Index r = 0; r < R; ++r)
        if (model.family[static_cast<std::size_t>(r)] == Family::Numeric)
          sse += (model.y.col(r) - theta.col(r)).squaredNorm();
      // the (N R - 1) divisor is not the exact minimizer; fall back to it when
      // the proposal would raise the likelihood term
      if (numeric_nll(sse, numeric_cells, proposed) > numeric_nll(sse, numeric_cells, params.sigma2)) {
        proposed = sse / numeric_cells;
      }
      if (!(proposed > 0.0)) proposed = std::numeric_limits<double>::min();
      params.sigma2 = proposed;
      for (const auto& s : w) log.add("small-variance", s);
    }

    for (Index r = 0; r < R; ++r) {
      if (model.family[static_cast<std::size_t>(r)] != Family::Ordinal) continue;
      auto& t = params.thresholds[static_cast<std::size_t>(r)];
      t = update_thresholds(model.y.col(r), theta.col(r), model.n_categories[static_cast<std::size_t>(r)], t);
    }

    double next = nll(model, theta, params.thresholds, params.sigma2).total;
    result.nll_trace.push_back(next);
    result.iterations = iter;
    double decrease = current - next;
    current = next;
    if (decrease < options.tolerance) {
      result.converged = true;
      break;
    }
  }
  if (!result.converged)
    result.warnings.push_back("maximum number of iterations (" + std::to_string(options.max_iterations) +
                              ") reached before convergence");

  if (options.identify) {
    Identified id = identify(params.b, params.v, phi);
    params.b = std::move(id.b);
    params.v = std::move(id.v);
  }
  params.rank = rank;
  result.params = std::move(params);
  result.n_parameters = count_parameters(data.schema(), rank);
  return result;
}

int classify_ordinal(double theta, const Vector& t) {
  int c = 1;
  while (c <= t.size() && theta >= t[c - 1]) ++c;
  return c;
}

Prediction predict(const ModelParams& params, const Matrix& phi) {
  Prediction out;
  out.theta = canonical(params, phi);
  const Index n = out.theta.rows();
  const Index R = out.theta.cols();
  out.expected = Matrix::Zero(n, R);
  out.probabilities.assign(static_cast<std::size_t>(R), Matrix());
  out.classes.assign(static_cast<std::size_t>(R), Eigen::VectorXi());
  for (Index r = 0; r < R; ++r) {
    const auto f = params.families[static_cast<std::size_t>(r)];
    if (f == Family::Numeric) {
      out.expected.col(r) = out.theta.col(r);
    } else if (f == Family::Binary) {
      for (Index i = 0; i < n; ++i) out.expected(i, r) = logistic_cdf(out.theta(i, r));
    } else {
      const Vector& t = params.thresholds[static_cast<std::size_t>(r)];
      Matrix& pr = out.probabilities[static_cast<std::size_t>(r)];
      Eigen::VectorXi& cls = out.classes[static_cast<std::size_t>(r)];
      pr.resize(n, t.size() + 1);
      cls.resize(n);
      for (Index i = 0; i < n; ++i) {
        pr.row(i) = ordinal_category_probs(out.theta(i, r), t).transpose();
        cls[i] = classify_ordinal(out.theta(i, r), t);
      }
    }
  }
  return out;
}

Prediction predict(const ModelParams& params, const Dataset& data, bool neutral_unknown) {
  return predict(params, apply_scaling(data, params.transforms, neutral_unknown));
}

}  // namespace gmr3
